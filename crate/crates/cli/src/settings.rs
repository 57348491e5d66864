//! Flag, config file and default resolution. Every resolved key is
//! remembered with its source so commands can echo what they ran with.

use std::fmt::Display;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use anyhow::{anyhow, bail, Context, Result};
use serde_json::{Map, Value as Json};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Source {
    Flag,
    File,
    Default,
}

impl Source {
    fn as_str(self) -> &'static str {
        match self {
            Source::Flag => "flag",
            Source::File => "file",
            Source::Default => "default",
        }
    }
}

pub struct Settings {
    command: String,
    file: toml::Table,
    resolved: Vec<(String, String, Source)>,
}

impl Settings {
    /// Reads `[command]` from the TOML config file, with top-level keys as
    /// fallbacks shared by every command.
    pub fn load(path: Option<&Path>, command: &str) -> Result<Self> {
        let mut file = toml::Table::new();
        if let Some(path) = path {
            let text = fs::read_to_string(path).with_context(|| format!("config file {}", path.display()))?;
            let mut root: toml::Table = text
                .parse()
                .with_context(|| format!("config file {}", path.display()))?;
            let section = match root.remove(command) {
                Some(toml::Value::Table(t)) => t,
                Some(_) => bail!("config file: `{command}` must be a table"),
                None => toml::Table::new(),
            };
            file = root.into_iter().filter(|(_, v)| !v.is_table()).collect();
            file.extend(section);
        }
        Ok(Settings {
            command: command.to_string(),
            file,
            resolved: Vec::new(),
        })
    }

    fn file_value<T>(&self, key: &str) -> Result<Option<T>>
    where
        T: FromStr,
        T::Err: Display,
    {
        let raw = self.file.get(key).or_else(|| self.file.get(&key.replace('-', "_")));
        let Some(raw) = raw else { return Ok(None) };
        let text = match raw {
            toml::Value::String(s) => s.clone(),
            toml::Value::Array(items) => items
                .iter()
                .map(|v| v.as_str().map_or_else(|| v.to_string(), str::to_string))
                .collect::<Vec<_>>()
                .join(","),
            other => other.to_string(),
        };
        text.parse()
            .map(Some)
            .map_err(|e| anyhow!("config file key `{key}` = {text}: {e}"))
    }

    fn record(&mut self, key: &str, shown: String, source: Source) {
        self.resolved.push((key.to_string(), shown, source));
    }

    /// Flag, then config file, then `default`.
    pub fn get<T>(&mut self, key: &str, flag: Option<T>, default: T) -> Result<T>
    where
        T: FromStr + Display,
        T::Err: Display,
    {
        let (v, src) = match flag {
            Some(v) => (v, Source::Flag),
            None => match self.file_value(key)? {
                Some(v) => (v, Source::File),
                None => (default, Source::Default),
            },
        };
        self.record(key, v.to_string(), src);
        Ok(v)
    }

    /// Like [`Settings::get`] but without a default.
    pub fn get_opt<T>(&mut self, key: &str, flag: Option<T>) -> Result<Option<T>>
    where
        T: FromStr + Display,
        T::Err: Display,
    {
        let found = match flag {
            Some(v) => Some((v, Source::Flag)),
            None => self.file_value(key)?.map(|v| (v, Source::File)),
        };
        Ok(found.map(|(v, src)| {
            self.record(key, v.to_string(), src);
            v
        }))
    }

    /// A key that must come from a flag or the config file.
    pub fn require<T>(&mut self, key: &str, flag: Option<T>) -> Result<T>
    where
        T: FromStr + Display,
        T::Err: Display,
    {
        self.get_opt(key, flag)?
            .ok_or_else(|| anyhow!("{}: missing required setting `--{key}`", self.command))
    }

    /// One `# key = value (source)` line per setting on stderr.
    pub fn echo(&self) {
        eprintln!("# {}", self.command);
        for (k, v, src) in &self.resolved {
            eprintln!("#   {k} = {v} ({})", src.as_str());
        }
    }

    pub fn to_json(&self) -> Json {
        let mut m = Map::new();
        for (k, v, src) in &self.resolved {
            m.insert(k.clone(), serde_json::json!({ "value": v, "source": src.as_str() }));
        }
        Json::Object(m)
    }
}

/// Comma-separated list flag value.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct List(pub Vec<String>);

impl FromStr for List {
    type Err = std::convert::Infallible;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        Ok(List(
            s.split(',')
                .map(str::trim)
                .filter(|x| !x.is_empty())
                .map(str::to_string)
                .collect(),
        ))
    }
}

impl Display for List {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0.join(","))
    }
}
