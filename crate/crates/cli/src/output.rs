//! CSV and summary formatting.

use nalgebra::DVector;

/// 17 significant digits, enough to round-trip an f64.
pub fn num(v: f64) -> String {
    if v.is_nan() {
        "nan".into()
    } else if v.is_infinite() {
        if v > 0.0 { "inf" } else { "-inf" }.into()
    } else {
        format!("{v:.16e}")
    }
}

/// Vector components joined by `;` so the cell needs no quoting.
pub fn vector(v: &DVector<f64>) -> String {
    v.iter().map(|x| num(*x)).collect::<Vec<_>>().join(";")
}

/// Minimal RFC-4180 table: cells here never contain commas, quotes or newlines.
#[derive(Debug, Default)]
pub struct Table {
    text: String,
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        let mut t = Self::default();
        t.row(header.iter().map(|s| s.to_string()));
        t
    }

    pub fn row<I: IntoIterator<Item = String>>(&mut self, cells: I) {
        let cells: Vec<String> = cells.into_iter().collect();
        debug_assert!(cells.iter().all(|c| !c.contains([',', '"', '\n'])));
        self.text.push_str(&cells.join(","));
        self.text.push('\n');
    }

    pub fn into_bytes(self) -> Vec<u8> {
        self.text.into_bytes()
    }
}

/// Accumulates files and `key: value` summary lines for one run.
#[derive(Debug, Default)]
pub struct Report {
    pub files: Vec<(String, Vec<u8>)>,
    pub lines: Vec<(String, String)>,
    pub pass: bool,
}

impl Report {
    pub fn new() -> Self {
        Self { pass: true, ..Self::default() }
    }

    pub fn line(&mut self, key: impl Into<String>, value: impl ToString) {
        self.lines.push((key.into(), value.to_string()));
    }

    pub fn file(&mut self, name: &str, bytes: Vec<u8>) {
        self.files.push((name.to_string(), bytes));
    }

    /// Records a pass flag; any `false` makes the run fail.
    pub fn check(&mut self, key: impl Into<String>, ok: bool) {
        self.pass &= ok;
        self.line(key, if ok { "PASS" } else { "FAIL" });
    }

    pub fn summary(&self, cfg: &crate::ExperimentConfig) -> String {
        let mut s = format!("experiment: {}\nmode: {}\n", cfg.name, cfg.mode.name());
        if let Some(seed) = cfg.seed {
            s.push_str(&format!("seed: {seed}\n"));
        }
        for (k, v) in &self.lines {
            s.push_str(&format!("{k}: {v}\n"));
        }
        let mut files: Vec<&str> = self.files.iter().map(|(f, _)| f.as_str()).collect();
        files.push("summary.txt");
        s.push_str(&format!("files: {}\n", files.join(" ")));
        s.push_str(&format!("result: {}\n", if self.pass { "PASS" } else { "FAIL" }));
        s
    }
}
