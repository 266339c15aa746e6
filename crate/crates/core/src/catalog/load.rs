//! Item and transaction file formats.
//!
//! Items: delimited text with header
//! `item_id,title,main_author,genres,subjects,age_category,medium_type,fiction,added_date,first_published_year`
//! (genres and subjects `;`-separated), or one JSON object per line with the
//! same keys. Transactions: delimited text with header `user_id,item_id,timestamp`.

use std::collections::BTreeSet;
use std::fs::File;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;
use std::str::FromStr;

use chrono::{DateTime, NaiveDate, NaiveDateTime};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::{AuthorKey, Catalog, Item, ItemId, Transaction};
use crate::error::{Error, Result};

pub const TIMESTAMP_FORMAT: &str = "%Y-%m-%dT%H:%M:%S";

const ITEM_COLUMNS: [&str; 10] = [
    "item_id",
    "title",
    "main_author",
    "genres",
    "subjects",
    "age_category",
    "medium_type",
    "fiction",
    "added_date",
    "first_published_year",
];

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ItemFormat {
    Csv,
    Jsonl,
}

impl ItemFormat {
    /// Guesses the format from the file extension, defaulting to CSV.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some("jsonl") | Some("ndjson") => ItemFormat::Jsonl,
            _ => ItemFormat::Csv,
        }
    }
}

impl FromStr for ItemFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(ItemFormat::Csv),
            "jsonl" => Ok(ItemFormat::Jsonl),
            other => Err(Error::InvalidParameter(format!(
                "unknown item format `{other}` (expected csv or jsonl)"
            ))),
        }
    }
}

/// A rejected input row.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LoadIssue {
    pub row: usize,
    pub reason: String,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LoadReport {
    pub rows_read: usize,
    pub rows_loaded: usize,
    pub dropped_unknown_items: usize,
    pub issues: Vec<LoadIssue>,
}

impl LoadReport {
    fn reject(&mut self, row: usize, reason: impl Into<String>) {
        self.issues.push(LoadIssue {
            row,
            reason: reason.into(),
        });
    }

    /// Appends another report's issues and counts.
    pub fn merge(&mut self, other: LoadReport) {
        self.rows_read += other.rows_read;
        self.rows_loaded += other.rows_loaded;
        self.dropped_unknown_items += other.dropped_unknown_items;
        self.issues.extend(other.issues);
    }

    /// Writes the issues as line-delimited `{row, reason}` records.
    pub fn write_jsonl<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        for issue in &self.issues {
            serde_json::to_writer(&mut out, issue)?;
            out.write_all(b"\n")?;
        }
        Ok(())
    }
}

pub fn load_items(path: &Path, format: ItemFormat) -> Result<(Catalog, LoadReport)> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_items(BufReader::new(file), format, path)
}

pub fn load_transactions(path: &Path, catalog: &Catalog) -> Result<(Vec<Transaction>, LoadReport)> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_transactions(BufReader::new(file), catalog, path)
}

/// Raw attribute cells before validation; `None` means the column is absent.
#[derive(Default)]
struct RawItem {
    cells: [Option<String>; 10],
}

impl RawItem {
    fn get(&self, column: usize) -> Option<&str> {
        self.cells[column].as_deref().map(str::trim).filter(|s| !s.is_empty())
    }

    fn into_item(self) -> std::result::Result<Item, String> {
        let item_id = self.get(0).ok_or("empty item_id")?;
        let mut item = Item::new(item_id);
        item.title = self.get(1).unwrap_or_default().to_owned();
        item.main_author = self.get(2).and_then(AuthorKey::normalize);
        item.genres = split_list(self.get(3));
        item.subjects = split_list(self.get(4));
        item.age_category = self.get(5).map(str::to_owned);
        item.medium_type = self.get(6).map(str::to_owned);
        item.fiction = match self.get(7) {
            None => None,
            Some(s) if s.eq_ignore_ascii_case("true") => Some(true),
            Some(s) if s.eq_ignore_ascii_case("false") => Some(false),
            Some(s) => return Err(format!("fiction must be true, false or empty, got `{s}`")),
        };
        item.added_date = self
            .get(8)
            .map(|s| parse_date(s).ok_or_else(|| format!("unparseable added_date `{s}`")))
            .transpose()?;
        item.first_published_year = self
            .get(9)
            .map(|s| {
                s.parse::<i32>()
                    .map_err(|_| format!("unparseable first_published_year `{s}`"))
            })
            .transpose()?;
        Ok(item)
    }
}

fn split_list(cell: Option<&str>) -> BTreeSet<String> {
    cell.map(|s| {
        s.split(';')
            .map(str::trim)
            .filter(|v| !v.is_empty())
            .map(str::to_owned)
            .collect()
    })
    .unwrap_or_default()
}

fn parse_date(s: &str) -> Option<NaiveDate> {
    NaiveDate::parse_from_str(s, "%Y-%m-%d")
        .ok()
        .or_else(|| parse_timestamp(s).map(|t| t.date()))
}

/// Parses an ISO-8601 timestamp to second resolution (UTC if an offset is given).
pub fn parse_timestamp(s: &str) -> Option<NaiveDateTime> {
    let s = s.trim();
    if let Ok(t) = DateTime::parse_from_rfc3339(s) {
        return Some(t.naive_utc().with_nanosecond_truncated());
    }
    for fmt in ["%Y-%m-%dT%H:%M:%S%.f", "%Y-%m-%d %H:%M:%S%.f"] {
        if let Ok(t) = NaiveDateTime::parse_from_str(s, fmt) {
            return Some(t.with_nanosecond_truncated());
        }
    }
    NaiveDate::parse_from_str(s, "%Y-%m-%d")
        .ok()
        .and_then(|d| d.and_hms_opt(0, 0, 0))
}

trait TruncateNanos {
    fn with_nanosecond_truncated(self) -> Self;
}

impl TruncateNanos for NaiveDateTime {
    fn with_nanosecond_truncated(self) -> Self {
        use chrono::Timelike;
        self.with_nanosecond(0).unwrap_or(self)
    }
}

pub fn read_items<R: Read>(reader: R, format: ItemFormat, origin: &Path) -> Result<(Catalog, LoadReport)> {
    let rows = match format {
        ItemFormat::Csv => raw_items_csv(reader, origin)?,
        ItemFormat::Jsonl => raw_items_jsonl(reader, origin)?,
    };
    let mut report = LoadReport::default();
    let mut catalog = Catalog::new();
    for (row, raw) in rows {
        report.rows_read += 1;
        let raw = match raw {
            Ok(raw) => raw,
            Err(reason) => {
                report.reject(row, reason);
                continue;
            }
        };
        match raw.into_item() {
            Ok(item) => {
                if catalog.contains_key(&item.item_id) {
                    return Err(Error::DuplicateItem(item.item_id));
                }
                report.rows_loaded += 1;
                catalog.insert(item.item_id.clone(), item);
            }
            Err(reason) => report.reject(row, reason),
        }
    }
    Ok((catalog, report))
}

type RawRows = Vec<(usize, std::result::Result<RawItem, String>)>;

fn raw_items_csv<R: Read>(reader: R, origin: &Path) -> Result<RawRows> {
    let mut csv = csv::ReaderBuilder::new().flexible(true).from_reader(reader);
    let headers = csv.headers().map_err(|e| Error::parse(origin, e.to_string()))?.clone();
    let positions: Vec<Option<usize>> = ITEM_COLUMNS
        .iter()
        .map(|c| headers.iter().position(|h| h.trim() == *c))
        .collect();
    if positions[0].is_none() {
        return Err(Error::MissingColumn {
            path: origin.to_owned(),
            column: "item_id",
        });
    }
    let mut rows = Vec::new();
    for record in csv.records() {
        let record = match record {
            Ok(r) => r,
            Err(e) => {
                let line = e.position().map_or(0, |p| p.line() as usize);
                rows.push((line, Err(e.to_string())));
                continue;
            }
        };
        let line = record.position().map_or(0, |p| p.line() as usize);
        if record.len() != headers.len() {
            rows.push((
                line,
                Err(format!("expected {} fields, found {}", headers.len(), record.len())),
            ));
            continue;
        }
        let mut raw = RawItem::default();
        for (slot, pos) in raw.cells.iter_mut().zip(&positions) {
            *slot = pos.map(|p| record[p].to_owned());
        }
        rows.push((line, Ok(raw)));
    }
    Ok(rows)
}

fn raw_items_jsonl<R: Read>(reader: R, origin: &Path) -> Result<RawRows> {
    let mut rows = Vec::new();
    for (idx, line) in BufReader::new(reader).lines().enumerate() {
        let line = line.map_err(|e| Error::io(origin, e))?;
        let row = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        let parsed = match serde_json::from_str::<Value>(&line) {
            Ok(Value::Object(map)) => {
                let mut raw = RawItem::default();
                for (slot, column) in raw.cells.iter_mut().zip(ITEM_COLUMNS) {
                    *slot = map.get(column).and_then(json_cell);
                }
                Ok(raw)
            }
            Ok(_) => Err("record is not a JSON object".to_owned()),
            Err(e) => Err(e.to_string()),
        };
        rows.push((row, parsed));
    }
    Ok(rows)
}

fn json_cell(value: &Value) -> Option<String> {
    match value {
        Value::Null => None,
        Value::String(s) => Some(s.clone()),
        Value::Bool(b) => Some(b.to_string()),
        Value::Number(n) => Some(n.to_string()),
        Value::Array(values) => Some(values.iter().filter_map(json_cell).collect::<Vec<_>>().join(";")),
        Value::Object(_) => Some(value.to_string()),
    }
}

pub fn read_transactions<R: Read>(
    reader: R,
    catalog: &Catalog,
    origin: &Path,
) -> Result<(Vec<Transaction>, LoadReport)> {
    let mut report = LoadReport::default();
    let mut csv = csv::ReaderBuilder::new().flexible(true).from_reader(reader);
    let headers = csv.headers().map_err(|e| Error::parse(origin, e.to_string()))?.clone();
    if headers.is_empty() || headers.iter().all(|h| h.trim().is_empty()) {
        return Ok((Vec::new(), report));
    }
    let column = |name: &'static str| {
        headers
            .iter()
            .position(|h| h.trim() == name)
            .ok_or(Error::MissingColumn {
                path: origin.to_owned(),
                column: name,
            })
    };
    let (user_col, item_col, ts_col) = (column("user_id")?, column("item_id")?, column("timestamp")?);

    let mut transactions = Vec::new();
    for record in csv.records() {
        report.rows_read += 1;
        let record = match record {
            Ok(r) => r,
            Err(e) => {
                let line = e.position().map_or(0, |p| p.line() as usize);
                report.reject(line, e.to_string());
                continue;
            }
        };
        let line = record.position().map_or(0, |p| p.line() as usize);
        let field = |i: usize| record.get(i).map(str::trim).unwrap_or_default();
        let (user, item, stamp) = (field(user_col), field(item_col), field(ts_col));
        if user.is_empty() || item.is_empty() {
            report.reject(line, "empty user_id or item_id");
            continue;
        }
        let Some(timestamp) = parse_timestamp(stamp) else {
            report.reject(line, format!("unparseable timestamp `{stamp}`"));
            continue;
        };
        let item_id = ItemId::new(item);
        if !catalog.contains_key(&item_id) {
            report.dropped_unknown_items += 1;
            report.reject(line, format!("unknown item `{item}`"));
            continue;
        }
        report.rows_loaded += 1;
        transactions.push(Transaction {
            user_id: user.into(),
            item_id,
            timestamp,
        });
    }
    transactions.sort_by(|a, b| a.sort_key().cmp(&b.sort_key()));
    Ok((transactions, report))
}

pub fn write_items_csv<'a, W: Write>(out: W, items: impl IntoIterator<Item = &'a Item>) -> Result<()> {
    let mut csv = csv::Writer::from_writer(out);
    let csv_err = |e: csv::Error| Error::parse("<items output>", e.to_string());
    csv.write_record(ITEM_COLUMNS).map_err(csv_err)?;
    for item in items {
        let join = |set: &BTreeSet<String>| set.iter().cloned().collect::<Vec<_>>().join(";");
        csv.write_record([
            item.item_id.as_str(),
            &item.title,
            item.main_author.as_ref().map_or("", AuthorKey::as_str),
            &join(&item.genres),
            &join(&item.subjects),
            item.age_category.as_deref().unwrap_or(""),
            item.medium_type.as_deref().unwrap_or(""),
            &item.fiction.map(|f| f.to_string()).unwrap_or_default(),
            &item
                .added_date
                .map(|d| d.format("%Y-%m-%d").to_string())
                .unwrap_or_default(),
            &item.first_published_year.map(|y| y.to_string()).unwrap_or_default(),
        ])
        .map_err(csv_err)?;
    }
    csv.flush().map_err(|e| Error::io("<items output>", e))?;
    Ok(())
}

pub fn write_transactions_csv<'a, W: Write>(
    out: W,
    transactions: impl IntoIterator<Item = &'a Transaction>,
) -> Result<()> {
    let mut csv = csv::Writer::from_writer(out);
    let csv_err = |e: csv::Error| Error::parse("<transactions output>", e.to_string());
    csv.write_record(["user_id", "item_id", "timestamp"]).map_err(csv_err)?;
    for t in transactions {
        csv.write_record([
            t.user_id.as_str(),
            t.item_id.as_str(),
            &t.timestamp.format(TIMESTAMP_FORMAT).to_string(),
        ])
        .map_err(csv_err)?;
    }
    csv.flush().map_err(|e| Error::io("<transactions output>", e))?;
    Ok(())
}
