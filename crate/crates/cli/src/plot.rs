//! gnuplot scripts that render the CSV tables.

use std::fmt::Write as _;

/// One curve: a CSV column (1-based) against column 1.
pub struct Curve<'a> {
    pub column: usize,
    pub title: &'a str,
}

/// A line plot of several columns of `csv` against its first column.
pub struct Plot<'a> {
    pub csv: &'a str,
    pub title: &'a str,
    pub xlabel: &'a str,
    pub ylabel: &'a str,
    pub log_y: bool,
    pub curves: Vec<Curve<'a>>,
}

impl Plot<'_> {
    /// Script writing `<stem>.png` next to the CSV. The CSV header row is
    /// skipped and its `#` row is a gnuplot comment already.
    pub fn script(&self) -> String {
        let stem = self.csv.trim_end_matches(".csv");
        let mut s = String::new();
        let _ = writeln!(s, "set terminal pngcairo size 900,600");
        let _ = writeln!(s, "set output '{stem}.png'");
        let _ = writeln!(s, "set datafile separator ','");
        let _ = writeln!(s, "set title '{}'", self.title);
        let _ = writeln!(s, "set xlabel '{}'", self.xlabel);
        let _ = writeln!(s, "set ylabel '{}'", self.ylabel);
        if self.log_y {
            let _ = writeln!(s, "set logscale y");
            let _ = writeln!(s, "set format y '10^{{%L}}'");
        }
        let _ = writeln!(s, "set grid");
        let _ = writeln!(s, "set key top right");
        let curves: Vec<String> = self
            .curves
            .iter()
            .enumerate()
            .map(|(i, c)| {
                let file = if i == 0 { format!("'{}'", self.csv) } else { "''".into() };
                format!("{file} skip 1 using 1:{} with linespoints title '{}'", c.column, c.title)
            })
            .collect();
        let _ = writeln!(s, "plot {}", curves.join(", \\\n     "));
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn script_mentions_every_curve() {
        let p = Plot {
            csv: "decay.csv",
            title: "t",
            xlabel: "M",
            ylabel: "e",
            log_y: true,
            curves: vec![Curve { column: 2, title: "a" }, Curve { column: 3, title: "b" }],
        };
        let s = p.script();
        assert!(s.contains("set output 'decay.png'"));
        assert!(s.contains("'decay.csv' skip 1 using 1:2"));
        assert!(s.contains("'' skip 1 using 1:3"));
        assert!(s.contains("logscale y"));
    }
}
