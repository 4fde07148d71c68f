//! Analysis report rendering. Markdown and CSV come from the same tables, so
//! the two formats always carry identical numbers.

use std::fmt;
use std::str::FromStr;

use conseq_core::stats::AnalysisReport;
use conseq_core::study::Outcome;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Markdown,
    Csv,
    Json,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UnknownFormat(pub String);

impl fmt::Display for UnknownFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "unknown format `{}` (expected md, csv or json)", self.0)
    }
}

impl FromStr for Format {
    type Err = UnknownFormat;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "md" | "markdown" => Ok(Format::Markdown),
            "csv" => Ok(Format::Csv),
            "json" => Ok(Format::Json),
            other => Err(UnknownFormat(other.to_string())),
        }
    }
}

/// One titled table of text cells.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub title: String,
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

/// Fixed-width rendering shared by every tabular format.
pub fn number(x: f64) -> String {
    if x == 0.0 {
        "0".into()
    } else if x.abs() < 1e-4 {
        format!("{x:.3e}")
    } else {
        format!("{x:.4}")
    }
}

fn yes_no(b: bool) -> String {
    if b { "yes" } else { "no" }.into()
}

fn aim_label(o: Outcome) -> &'static str {
    match o {
        Outcome::Efficiency => "efficiency (s)",
        Outcome::Effectiveness => "effectiveness (delta)",
        Outcome::Satisfaction => "satisfaction",
        Outcome::Transparency => "transparency",
    }
}

/// Descriptives with aims as rows and groups as columns, then the normality,
/// omnibus and pairwise tables.
pub fn tables(report: &AnalysisReport) -> Vec<Table> {
    let keys = &report.plan.group_by;
    let mut header = vec!["aim".to_string()];
    header.extend(report.descriptives.iter().map(|r| r.label(keys)));
    let mut rows = vec![{
        let mut row = vec!["n".to_string()];
        row.extend(report.descriptives.iter().map(|r| r.n.to_string()));
        row
    }];
    for o in Outcome::ALL {
        let mut row = vec![aim_label(o).to_string()];
        row.extend(report.descriptives.iter().map(|r| number(r.means.get(o))));
        rows.push(row);
    }
    let descriptives = Table { title: format!("Mean per group ({})", keys.join(", ")), header, rows };

    let normality = Table {
        title: format!("Normality of {} (Shapiro-Wilk)", report.plan.outcome),
        header: ["group", "W", "p", "note"].map(String::from).to_vec(),
        rows: report
            .normality
            .iter()
            .map(|g| match &g.result {
                Some(r) => vec![g.group.clone(), number(r.statistic), number(r.p_value), String::new()],
                None => vec![g.group.clone(), "-".into(), "-".into(), g.note.clone().unwrap_or_default()],
            })
            .collect(),
    };

    let omnibus = Table {
        title: format!("Omnibus test of {} (Kruskal-Wallis)", report.plan.outcome),
        header: ["H", "p", "alpha", "significant"].map(String::from).to_vec(),
        rows: vec![vec![
            number(report.omnibus.statistic),
            number(report.omnibus.p_value),
            number(report.plan.alpha),
            yes_no(report.omnibus_significant),
        ]],
    };

    let pairwise = Table {
        title: "Pairwise follow-ups (Mann-Whitney U, Bonferroni)".into(),
        header: ["group a", "group b", "U", "p", "corrected alpha", "significant", "method"].map(String::from).to_vec(),
        rows: report
            .pairwise
            .iter()
            .map(|p| {
                vec![
                    p.groups[0].clone(),
                    p.groups[1].clone(),
                    number(p.result.statistic),
                    number(p.result.p_value),
                    number(p.corrected_alpha),
                    yes_no(p.significant),
                    p.result.method.clone(),
                ]
            })
            .collect(),
    };
    vec![descriptives, normality, omnibus, pairwise]
}

pub fn render(report: &AnalysisReport, format: Format) -> String {
    match format {
        Format::Json => serde_json::to_string_pretty(report).expect("reports serialize") + "\n",
        Format::Markdown => markdown(&tables(report), report),
        Format::Csv => csv_text(&tables(report)),
    }
}

fn markdown(tables: &[Table], report: &AnalysisReport) -> String {
    let mut out = String::new();
    if report.excluded_sessions > 0 {
        out.push_str(&format!("_{} incomplete session(s) excluded._\n\n", report.excluded_sessions));
    }
    for t in tables {
        out.push_str(&format!("## {}\n\n", t.title));
        if t.rows.is_empty() {
            out.push_str("(none)\n\n");
            continue;
        }
        let line = |cells: &[String]| format!("| {} |\n", cells.iter().map(|c| c.replace('|', "\\|")).collect::<Vec<_>>().join(" | "));
        out.push_str(&line(&t.header));
        out.push_str(&format!("|{}\n", "---|".repeat(t.header.len())));
        for row in &t.rows {
            out.push_str(&line(row));
        }
        out.push('\n');
    }
    out
}

/// Each table as a CSV block headed by its title, blocks separated by a blank line.
fn csv_text(tables: &[Table]) -> String {
    let mut blocks = Vec::new();
    for t in tables {
        let mut w = csv::WriterBuilder::new().flexible(true).from_writer(Vec::new());
        w.write_record([&t.title]).expect("in-memory write");
        w.write_record(&t.header).expect("in-memory write");
        for row in &t.rows {
            w.write_record(row).expect("in-memory write");
        }
        blocks.push(String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 cells"));
    }
    blocks.join("\n")
}
