use serde::{Deserialize, Serialize};

/// A named CSV table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Table {
    pub name: String,
    pub header: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn new(name: impl Into<String>, header: &[&str]) -> Self {
        Self { name: name.into(), header: header.iter().map(|s| s.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<f64>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let j = self.header.iter().position(|h| h == name)?;
        Some(self.rows.iter().map(|r| r[j]).collect())
    }

    pub fn to_csv(&self) -> String {
        let mut s = self.header.join(",");
        s.push('\n');
        for r in &self.rows {
            let cells: Vec<String> = r.iter().map(|&v| format_sig(v)).collect();
            s.push_str(&cells.join(","));
            s.push('\n');
        }
        s
    }
}

/// Decimal rendering with 12 significant digits.
pub fn format_sig(v: f64) -> String {
    if !v.is_finite() {
        return if v.is_nan() { "NaN".into() } else if v > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if v == 0.0 {
        return "0".into();
    }
    let rounded: f64 = format!("{v:.11e}").parse().expect("formatted float parses");
    let a = rounded.abs();
    if (1e-4..1e15).contains(&a) {
        format!("{rounded}")
    } else {
        format!("{rounded:e}")
    }
}

/// Outcome of one acceptance criterion.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub criterion: u32,
    pub name: String,
    pub value: f64,
    pub target: String,
    pub passed: bool,
}

impl Check {
    pub fn new(criterion: u32, name: &str, value: f64, target: &str, passed: bool) -> Self {
        Self { criterion, name: name.into(), value, target: target.into(), passed }
    }

    /// One-line report, `PASS`/`FAIL` first.
    pub fn line(&self) -> String {
        format!(
            "{} criterion {:>2} {}: value {} (target {})",
            if self.passed { "PASS" } else { "FAIL" },
            self.criterion,
            self.name,
            format_sig(self.value),
            self.target
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentResult {
    pub tables: Vec<Table>,
    pub summary: serde_json::Value,
    pub checks: Vec<Check>,
}

impl ExperimentResult {
    pub fn table(&self, name: &str) -> Option<&Table> {
        self.tables.iter().find(|t| t.name == name)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn twelve_digits() {
        assert_eq!(format_sig(0.1), "0.1");
        assert_eq!(format_sig(1.0 / 3.0), "0.333333333333");
        assert_eq!(format_sig(2.0 / 3.0 * 1e-7), "6.66666666667e-8");
        assert_eq!(format_sig(-12345.678901234567), "-12345.6789012");
        assert_eq!(format_sig(f64::NAN), "NaN");
        assert_eq!(format_sig(0.0), "0");
    }

    #[test]
    fn csv_layout() {
        let mut t = Table::new("x", &["a", "b"]);
        t.push(vec![1.0, 0.5]);
        assert_eq!(t.to_csv(), "a,b\n1,0.5\n");
        assert_eq!(t.column("b"), Some(vec![0.5]));
    }
}
