use std::fmt::Write as _;

use super::aggregate::EvalReport;
use super::categorize::Category;

fn pct(x: Option<f64>) -> String {
    x.map(|v| format!("{:.2}", v * 100.0))
        .unwrap_or_else(|| "-".into())
}

impl EvalReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// Fixed-width accuracy table: in-distribution sets, then challenge sets
    /// and their average, then standard sets and their average. Values are
    /// percentages of the seed mean.
    pub fn to_table(&self) -> String {
        let id = self.categories.members(Category::InDistribution);
        let ch = self.categories.members(Category::Challenge);
        let st = self.categories.members(Category::Standard);

        let mut header: Vec<String> = vec!["system".into()];
        let mut cols: Vec<(Option<&str>, Option<Category>)> = Vec::new();
        for d in &id {
            header.push(d.to_string());
            cols.push((Some(d), None));
        }
        for (members, cat) in [(&ch, Category::Challenge), (&st, Category::Standard)] {
            for d in members {
                header.push(d.to_string());
                cols.push((Some(d), None));
            }
            if !members.is_empty() {
                header.push(format!("{} avg", cat.as_str()));
                cols.push((None, Some(cat)));
            }
        }

        let mut rows = vec![header];
        for sys in &self.systems {
            let mut row = vec![sys.system.clone()];
            for (d, g) in &cols {
                row.push(match (d, g) {
                    (Some(d), _) => pct(sys.datasets.get(*d).map(|s| s.mean)),
                    (None, Some(g)) => pct(sys.groups.get(g).copied()),
                    _ => unreachable!(),
                });
            }
            rows.push(row);
        }

        let widths: Vec<usize> = (0..rows[0].len())
            .map(|c| rows.iter().map(|r| r[c].chars().count()).max().unwrap_or(0))
            .collect();
        let mut out = String::new();
        for note in &self.notes {
            let _ = writeln!(out, "# {note}");
        }
        for (i, row) in rows.iter().enumerate() {
            let cells: Vec<String> = row
                .iter()
                .zip(&widths)
                .enumerate()
                .map(|(c, (cell, w))| {
                    if c == 0 {
                        format!("{cell:<w$}")
                    } else {
                        format!("{cell:>w$}")
                    }
                })
                .collect();
            let _ = writeln!(out, "{}", cells.join(" | ").trim_end());
            if i == 0 {
                let rule: Vec<String> = widths.iter().map(|w| "-".repeat(*w)).collect();
                let _ = writeln!(out, "{}", rule.join("-+-"));
            }
        }
        if !self.significance.is_empty() {
            let _ = writeln!(out);
            for s in &self.significance {
                let _ = writeln!(
                    out,
                    "{} vs {} on {}: diff {:+.2} p = {:.4} (B = {})",
                    s.a,
                    s.b,
                    s.surface,
                    s.difference * 100.0,
                    s.p_value,
                    s.resamples
                );
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use crate::eval::*;

    #[test]
    fn table_layout() {
        let c = Categorization {
            entries: vec![
                ("snli".into(), Category::InDistribution),
                ("wanli".into(), Category::Challenge),
                ("fever".into(), Category::Standard),
            ],
        };
        let results = vec![
            RunResult::new("baseline", 0, "snli", vec![1, 1, 1, 0]).unwrap(),
            RunResult::new("baseline", 0, "wanli", vec![1, 0]).unwrap(),
            RunResult::new("baseline", 0, "fever", vec![1, 1, 0, 0]).unwrap(),
        ];
        let report = aggregate(&results, &c).unwrap();
        let table = report.to_table();
        let lines: Vec<&str> = table.lines().filter(|l| !l.starts_with('#')).collect();
        assert_eq!(
            lines[0],
            "system   |  snli | wanli | challenge avg | fever | standard avg"
        );
        assert_eq!(
            lines[2],
            "baseline | 75.00 | 50.00 |         50.00 | 50.00 |        50.00"
        );
        let back: EvalReport = serde_json::from_str(&report.to_json()).unwrap();
        assert_eq!(back, report);
    }
}
