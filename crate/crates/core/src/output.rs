//! CSV tables, gnuplot scripts and summaries, each written atomically.

use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use crate::error::Result;

/// Shortest form that keeps 17 significant digits.
pub fn num(v: f64) -> String {
    if v.is_nan() {
        "nan".into()
    } else if v.is_infinite() {
        if v > 0.0 { "inf" } else { "-inf" }.into()
    } else {
        format!("{v:.16e}")
    }
}

/// In-memory CSV table with a fixed header.
#[derive(Debug, Clone)]
pub struct Csv {
    width: usize,
    text: String,
}

impl Csv {
    pub fn new(header: &[&str]) -> Self {
        let mut text = header.join(",");
        text.push('\n');
        Csv { width: header.len(), text }
    }

    /// Appends one row; panics on a width mismatch, which is a programming error.
    pub fn row<I, S>(&mut self, fields: I)
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let mut n = 0;
        for f in fields {
            if n > 0 {
                self.text.push(',');
            }
            self.text.push_str(f.as_ref());
            n += 1;
        }
        assert_eq!(n, self.width, "CSV row width");
        self.text.push('\n');
    }

    pub fn nums(&mut self, values: &[f64]) {
        self.row(values.iter().map(|&v| num(v)));
    }

    pub fn as_str(&self) -> &str {
        &self.text
    }

    pub fn rows(&self) -> usize {
        self.text.lines().count() - 1
    }
}

/// Write to a sibling temporary file, flush, then rename over the target.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|d| !d.as_os_str().is_empty()).unwrap_or(Path::new("."));
    fs::create_dir_all(dir)?;
    let name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    let tmp = dir.join(format!(".{name}.{}.tmp", std::process::id()));
    let res = (|| {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(contents)?;
        f.sync_all()?;
        fs::rename(&tmp, path)
    })();
    if res.is_err() {
        let _ = fs::remove_file(&tmp);
    }
    Ok(res?)
}

/// Collects the files of one run under an output directory.
#[derive(Debug)]
pub struct OutputDir {
    root: PathBuf,
    written: Vec<PathBuf>,
}

impl OutputDir {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        OutputDir { root: root.into(), written: Vec::new() }
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn write(&mut self, name: &str, contents: &str) -> Result<PathBuf> {
        let p = self.root.join(name);
        write_atomic(&p, contents.as_bytes())?;
        self.written.push(p.clone());
        Ok(p)
    }

    pub fn csv(&mut self, name: &str, table: &Csv) -> Result<PathBuf> {
        self.write(name, table.as_str())
    }

    pub fn written(&self) -> &[PathBuf] {
        &self.written
    }
}

/// Plain-text key/value summary with free-form notes at the end.
#[derive(Debug, Default, Clone)]
pub struct Summary {
    title: String,
    entries: Vec<(String, String)>,
    notes: Vec<String>,
}

impl Summary {
    pub fn new(title: &str) -> Self {
        Summary { title: title.into(), ..Default::default() }
    }

    pub fn entry(&mut self, key: &str, value: impl std::fmt::Display) -> &mut Self {
        self.entries.push((key.into(), value.to_string()));
        self
    }

    pub fn note(&mut self, text: impl Into<String>) -> &mut Self {
        self.notes.push(text.into());
        self
    }

    pub fn render(&self) -> String {
        let pad = self.entries.iter().map(|(k, _)| k.len()).max().unwrap_or(0);
        let mut s = format!("{}\n", self.title);
        for (k, v) in &self.entries {
            let _ = writeln!(s, "  {k:<pad$}  {v}");
        }
        for n in &self.notes {
            let _ = writeln!(s, "  - {n}");
        }
        s
    }
}

/// Log-log plot of measured and predicted values against the swept parameter.
pub fn loglog_script(csv: &str, png: &str, xlabel: &str, ylabel: &str, slope: f64, intercept: f64) -> String {
    format!(
        "set datafile separator ','\n\
         set terminal pngcairo size 800,600\n\
         set output '{png}'\n\
         set logscale xy\n\
         set key top left\n\
         set xlabel '{xlabel}'\n\
         set ylabel '{ylabel}'\n\
         fit_line(x) = exp({}) * x**({})\n\
         plot '{csv}' using 1:($4 > 0 ? $2 : 1/0) with points pt 7 title 'measured', \\\n\
         \x20    '{csv}' using 1:3 with lines dt 2 title 'predicted', \\\n\
         \x20    fit_line(x) with lines title sprintf('fit, slope %.3f', {})\n",
        num(intercept),
        num(slope),
        num(slope)
    )
}

/// Velocity against θ for a regime table, oracle and composite.
pub fn regime_script(csvs: &[(String, String)], png: &str) -> String {
    let mut s = format!(
        "set datafile separator ','\n\
         set terminal pngcairo size 800,600\n\
         set output '{png}'\n\
         set xlabel 'theta'\n\
         set ylabel 'trading speed'\n\
         set key bottom left\n\
         plot "
    );
    let parts: Vec<String> = csvs
        .iter()
        .map(|(file, label)| {
            format!("'{file}' using 1:2 with lines title '{label} numeric', '{file}' using 1:4 with lines dt 2 title '{label} composite'")
        })
        .collect();
    s.push_str(&parts.join(", \\\n     "));
    s.push('\n');
    s
}

/// Band edges against x.
pub fn band_script(csv: &str, png: &str) -> String {
    format!(
        "set datafile separator ','\n\
         set terminal pngcairo size 800,600\n\
         set output '{png}'\n\
         set xlabel 'x'\n\
         set ylabel 'theta'\n\
         plot '{csv}' using 1:($6 > 0 ? $2 : 1/0) with lines title 'upper edge', \\\n\
         \x20    '{csv}' using 1:($6 > 0 ? -$3 : 1/0) with lines title 'lower edge'\n"
    )
}
