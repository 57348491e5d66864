use std::collections::BTreeSet;
use std::io::Read;

use crate::error::{Error, Result};
use crate::ingest::Dictionaries;
use crate::model::{Record, Value, ValueDomain};

/// Which CSV columns play which role.
#[derive(Clone, Debug)]
pub struct CsvLayout {
    pub value_column: String,
    pub time_column: Option<String>,
    /// `None` means every column that is neither value nor time.
    pub dim_columns: Option<Vec<String>>,
    pub domain: ValueDomain,
}

impl Default for CsvLayout {
    fn default() -> Self {
        CsvLayout {
            value_column: "value".into(),
            time_column: Some("time".into()),
            dim_columns: None,
            domain: ValueDomain::Categorical,
        }
    }
}

#[derive(Clone, Debug)]
pub struct Dataset {
    pub records: Vec<Record>,
    pub dictionaries: Dictionaries,
    pub dims: Vec<String>,
}

fn column(headers: &csv::StringRecord, name: &str) -> Result<usize> {
    headers
        .iter()
        .position(|h| h == name)
        .ok_or_else(|| Error::Csv(format!("missing column `{name}`")))
}

/// Reads a headed CSV. Categorical values and dimension values are interned
/// in sorted string order, so ids do not depend on row order.
pub fn read_csv<R: Read>(reader: R, layout: &CsvLayout) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let headers = rdr.headers().map_err(|e| Error::Csv(e.to_string()))?.clone();
    let value_idx = column(&headers, &layout.value_column)?;
    let time_idx = match &layout.time_column {
        Some(name) if headers.iter().any(|h| h == name) => Some(column(&headers, name)?),
        _ => None,
    };
    let dims: Vec<String> = match &layout.dim_columns {
        Some(cols) => cols.clone(),
        None => headers
            .iter()
            .enumerate()
            .filter(|(i, _)| *i != value_idx && Some(*i) != time_idx)
            .map(|(_, h)| h.to_string())
            .collect(),
    };
    let dim_idx: Vec<usize> = dims.iter().map(|d| column(&headers, d)).collect::<Result<_>>()?;

    struct Raw {
        value: String,
        time: Option<i64>,
        dims: Vec<String>,
    }
    let mut raw = Vec::new();
    for row in rdr.records() {
        let row = row.map_err(|e| Error::Csv(e.to_string()))?;
        let field = |i: usize| row.get(i).unwrap_or("").trim().to_string();
        let time = match time_idx {
            Some(i) => {
                let s = field(i);
                Some(
                    s.parse::<i64>()
                        .map_err(|_| Error::Csv(format!("bad timestamp `{s}`")))?,
                )
            }
            None => None,
        };
        raw.push(Raw {
            value: field(value_idx),
            time,
            dims: dim_idx.iter().map(|&i| field(i)).collect(),
        });
    }

    let values: Vec<String> = match layout.domain {
        ValueDomain::Categorical => raw
            .iter()
            .map(|r| r.value.clone())
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect(),
        ValueDomain::Ordinal => Vec::new(),
    };
    let dim_dicts: Vec<Vec<String>> = (0..dims.len())
        .map(|j| {
            raw.iter()
                .map(|r| r.dims[j].clone())
                .collect::<BTreeSet<_>>()
                .into_iter()
                .collect()
        })
        .collect();
    let dictionaries = Dictionaries {
        values,
        dims: dim_dicts,
    };

    let mut records = Vec::with_capacity(raw.len());
    for r in raw {
        let value = match layout.domain {
            ValueDomain::Categorical => dictionaries.value_id(&r.value).expect("value interned above"),
            ValueDomain::Ordinal => {
                let x: f64 = r
                    .value
                    .parse()
                    .map_err(|_| Error::Csv(format!("bad ordinal value `{}`", r.value)))?;
                Value::from_f64(x)?
            }
        };
        let dims = r
            .dims
            .iter()
            .enumerate()
            .map(|(j, d)| dictionaries.dim_value_id(j, d).expect("dim interned above"))
            .collect();
        records.push(Record {
            value,
            time: r.time,
            dims,
        });
    }
    Ok(Dataset {
        records,
        dictionaries,
        dims,
    })
}
