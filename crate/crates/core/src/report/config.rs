//! Flat `key = value` configuration with per-command schemas and defaults.
//!
//! Lines starting with `#` are comments; lists are comma-separated. Resolution order is
//! schema defaults, then the file, then command-line overrides.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::model::{Geometry, QuadraticForm, Shape};
use crate::par::ExecMode;
use crate::semilinear::Detector;

/// One schema entry: key, default value (empty means "unset"), description.
pub type KeySpec = (&'static str, &'static str, &'static str);

#[derive(Debug, Clone, PartialEq)]
pub struct Config {
    command: String,
    order: Vec<&'static str>,
    values: BTreeMap<&'static str, String>,
    docs: BTreeMap<&'static str, &'static str>,
}

/// Parses `key = value` lines into (key, value, line number).
pub fn parse_lines(text: &str) -> Result<Vec<(String, String, usize)>> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::invalid(format!("config line {}: expected `key = value`", i + 1)))?;
        let key = k.trim();
        if key.is_empty() || !key.chars().all(|c| c.is_ascii_alphanumeric() || c == '_') {
            return Err(Error::invalid(format!("config line {}: bad key `{key}`", i + 1)));
        }
        out.push((key.to_string(), v.trim().to_string(), i + 1));
    }
    Ok(out)
}

impl Config {
    pub fn new(command: &str, schema: &[KeySpec]) -> Self {
        Config {
            command: command.to_string(),
            order: schema.iter().map(|s| s.0).collect(),
            values: schema.iter().map(|s| (s.0, s.1.to_string())).collect(),
            docs: schema.iter().map(|s| (s.0, s.2)).collect(),
        }
    }

    pub fn command(&self) -> &str {
        &self.command
    }

    /// Sets a key known to the schema.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let Some(slot) = self.order.iter().find(|k| **k == key) else {
            return Err(Error::invalid(format!("unknown key `{key}` for `{}`", self.command)));
        };
        self.values.insert(slot, value.trim().to_string());
        Ok(())
    }

    /// Applies a config file's text. A `command` key, if present, must name this command.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (k, v, line) in parse_lines(text)? {
            if k == "command" {
                if v != self.command {
                    return Err(Error::invalid(format!(
                        "config line {line}: written for `{v}`, running `{}`",
                        self.command
                    )));
                }
                continue;
            }
            self.set(&k, &v)
                .map_err(|e| Error::invalid(format!("config line {line}: {}", strip(&e))))?;
        }
        Ok(())
    }

    pub fn raw(&self, key: &str) -> &str {
        self.values.get(key).map(String::as_str).unwrap_or("")
    }

    pub fn is_set(&self, key: &str) -> bool {
        !self.raw(key).is_empty()
    }

    fn bad(&self, key: &str, what: &str) -> Error {
        Error::invalid(format!("`{key}` = `{}`: {what}", self.raw(key)))
    }

    pub fn f64(&self, key: &str) -> Result<f64> {
        let x: f64 = self.raw(key).parse().map_err(|_| self.bad(key, "expected a number"))?;
        if !x.is_finite() {
            return Err(self.bad(key, "must be finite"));
        }
        Ok(x)
    }

    pub fn positive(&self, key: &str) -> Result<f64> {
        let x = self.f64(key)?;
        if x > 0.0 {
            Ok(x)
        } else {
            Err(self.bad(key, "must be positive"))
        }
    }

    pub fn opt_f64(&self, key: &str) -> Result<Option<f64>> {
        if self.is_set(key) {
            self.f64(key).map(Some)
        } else {
            Ok(None)
        }
    }

    pub fn usize(&self, key: &str) -> Result<usize> {
        self.raw(key).parse().map_err(|_| self.bad(key, "expected a non-negative integer"))
    }

    pub fn u64(&self, key: &str) -> Result<u64> {
        self.raw(key).parse().map_err(|_| self.bad(key, "expected a non-negative integer"))
    }

    pub fn bool(&self, key: &str) -> Result<bool> {
        match self.raw(key) {
            "true" | "yes" | "1" => Ok(true),
            "false" | "no" | "0" => Ok(false),
            _ => Err(self.bad(key, "expected true or false")),
        }
    }

    pub fn list(&self, key: &str) -> Vec<String> {
        self.raw(key)
            .split(',')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(String::from)
            .collect()
    }

    pub fn f64_list(&self, key: &str) -> Result<Vec<f64>> {
        self.list(key)
            .iter()
            .map(|s| {
                s.parse::<f64>()
                    .ok()
                    .filter(|x| x.is_finite())
                    .ok_or_else(|| self.bad(key, "expected a list of numbers"))
            })
            .collect()
    }

    pub fn shape(&self, key: &str) -> Result<Shape> {
        Shape::parse(self.raw(key)).map_err(|e| self.bad(key, &strip(&e)))
    }

    pub fn form(&self, key: &str) -> Result<QuadraticForm> {
        let c = self.f64_list(key)?;
        if c.len() != 3 {
            return Err(self.bad(key, "expected three coefficients a,b,c"));
        }
        Ok(QuadraticForm::new(c[0], c[1], c[2]))
    }

    /// `geometry` plus `r0` for the exterior case.
    pub fn geometry(&self) -> Result<Geometry> {
        let g = match self.raw("geometry") {
            "minkowski" => Geometry::Minkowski,
            "exterior" => Geometry::ExteriorBall { r0: self.positive("r0")? },
            _ => return Err(self.bad("geometry", "expected minkowski or exterior")),
        };
        g.validate()?;
        Ok(g)
    }

    pub fn detector(&self, key: &str) -> Result<Detector> {
        match self.raw(key) {
            "sup" => Ok(Detector::Sup),
            "weighted" => Ok(Detector::Weighted),
            _ => Err(self.bad(key, "expected sup or weighted")),
        }
    }

    pub fn mode(&self, key: &str) -> Result<ExecMode> {
        match self.raw(key) {
            "parallel" => Ok(ExecMode::Parallel),
            "sequential" => Ok(ExecMode::Sequential),
            _ => Err(self.bad(key, "expected parallel or sequential")),
        }
    }

    /// The fully resolved configuration, loadable again with [`Config::apply_text`].
    pub fn render(&self) -> String {
        let mut s = format!("command = {}\n", self.command);
        for k in &self.order {
            s.push_str(&format!("# {}\n{k} = {}\n", self.docs[k], self.values[k]));
        }
        s
    }
}

fn strip(e: &Error) -> String {
    match e {
        Error::InvalidArgument(m) => m.clone(),
        other => other.to_string(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const SCHEMA: &[KeySpec] = &[
        ("dr", "0.1", "grid step"),
        ("eps_list", "1,2", "values"),
        ("g", "bump:1:3:4", "profile"),
        ("geometry", "minkowski", "geometry"),
        ("r0", "0.5", "ball radius"),
    ];

    #[test]
    fn defaults_file_and_overrides() {
        let mut c = Config::new("x", SCHEMA);
        c.apply_text("# comment\n\n dr = 0.05 \neps_list = 1.5, 2.5,3\n").unwrap();
        assert_eq!(c.f64("dr").unwrap(), 0.05);
        assert_eq!(c.f64_list("eps_list").unwrap(), vec![1.5, 2.5, 3.0]);
        c.set("dr", "0.02").unwrap();
        assert_eq!(c.f64("dr").unwrap(), 0.02);
        assert_eq!(c.shape("g").unwrap(), Shape::poly_bump(1.0, 3.0, 4));
    }

    #[test]
    fn errors_name_the_key() {
        let mut c = Config::new("x", SCHEMA);
        let e = c.apply_text("bogus = 1").unwrap_err().to_string();
        assert!(e.contains("bogus") && e.contains("line 1"), "{e}");
        assert!(c.apply_text("dr 0.1").is_err());
        c.set("dr", "abc").unwrap();
        assert!(c.f64("dr").unwrap_err().to_string().contains("`dr`"));
        c.set("geometry", "sphere").unwrap();
        assert!(c.geometry().is_err());
        assert!(c.apply_text("command = other").is_err());
    }

    #[test]
    fn render_round_trips() {
        let mut c = Config::new("x", SCHEMA);
        c.set("geometry", "exterior").unwrap();
        c.set("r0", "0.75").unwrap();
        let mut d = Config::new("x", SCHEMA);
        d.apply_text(&c.render()).unwrap();
        assert_eq!(c, d);
        assert_eq!(d.geometry().unwrap(), Geometry::ExteriorBall { r0: 0.75 });
    }
}
