use super::aggregate::{CorpusStats, EvolutionRow};
use super::Attack;

fn mark(b: bool) -> &'static str {
    if b {
        "yes"
    } else {
        "no"
    }
}

/// Feature-combination table: Encryption, Nonce, Authentication, Count, Percent.
pub fn render_combinations(stats: &CorpusStats) -> String {
    let mut out =
        format!("{:<11} {:<6} {:<15} {:>6} {:>8}\n", "Encryption", "Nonce", "Authentication", "Count", "Percent");
    for row in &stats.combinations {
        out.push_str(&format!(
            "{:<11} {:<6} {:<15} {:>6} {:>7}%\n",
            mark(row.encryption),
            mark(row.nonce),
            mark(row.authentication),
            row.count,
            row.percent
        ));
    }
    out.push_str(&format!("{:<34} {:>6} {:>7}%\n", "total", stats.total, "100.00"));
    out
}

/// One row per group: size, secure share and each attack's prevalence.
pub fn render_groups(stats: &CorpusStats) -> String {
    let key_w = stats.groups.iter().map(|g| g.key.chars().count()).max().unwrap_or(5).max(5);
    let mut out = format!("{:<key_w$} {:>5} {:>8}", "group", "apps", "secure");
    for a in Attack::ALL {
        out.push_str(&format!(" {:>width$}", a.as_str(), width = a.as_str().len().max(7)));
    }
    out.push('\n');
    for g in &stats.groups {
        out.push_str(&format!("{:<key_w$} {:>5} {:>7}%", g.key, g.total, g.secure_percent));
        for (a, row) in Attack::ALL.iter().zip(&g.attacks) {
            out.push_str(&format!(" {:>width$}", format!("{}%", row.percent), width = a.as_str().len().max(7)));
        }
        out.push('\n');
    }
    out
}

/// `S` secure, `I` insecure, `.` missing version.
pub fn render_evolution(columns: &[u64], rows: &[EvolutionRow]) -> String {
    let id_w = rows.iter().map(|r| r.app_id.len()).max().unwrap_or(3).max(3);
    let mut out = format!("{:<id_w$} | {}\n", "app", columns.iter().map(u64::to_string).collect::<Vec<_>>().join(" "));
    for r in rows {
        let cells: Vec<String> = columns
            .iter()
            .zip(&r.cells)
            .map(|(v, c)| {
                let w = v.to_string().len();
                let ch = match c {
                    Some(true) => "S",
                    Some(false) => "I",
                    None => ".",
                };
                format!("{ch:>w$}")
            })
            .collect();
        let note = if r.improved {
            "  improved"
        } else if r.regressed {
            "  regressed"
        } else {
            ""
        };
        out.push_str(&format!("{:<id_w$} | {}{note}\n", r.app_id, cells.join(" ")));
    }
    out
}
