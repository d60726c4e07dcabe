use std::fmt::Write as _;

use super::simplex::{LinearProgram, Relation};

/// Formats `v` in at most 12 characters, keeping as many digits as fit.
fn fit12(v: f64) -> String {
    let plain = format!("{v}");
    if plain.len() <= 12 {
        return plain;
    }
    (0..=10)
        .rev()
        .map(|p| format!("{v:.p$e}"))
        .find(|s| s.len() <= 12)
        .unwrap_or_else(|| format!("{v:.0e}"))
}

/// Fixed-format MPS. Fields start at columns 2, 5, 15 and 25; names are
/// limited to 8 characters. Variables are implicitly nonnegative.
pub fn write_mps(
    lp: &LinearProgram,
    name: &str,
    row_names: &[String],
    col_names: &[String],
) -> String {
    assert_eq!(row_names.len(), lp.num_constraints());
    assert_eq!(col_names.len(), lp.num_vars());
    let mut s = String::new();
    let _ = writeln!(s, "NAME          {name}");
    s.push_str("ROWS\n");
    let _ = writeln!(s, " N  COST");
    for (rel, row) in lp.relations.iter().zip(row_names) {
        let tag = match rel {
            Relation::Le => "L",
            Relation::Ge => "G",
            Relation::Eq => "E",
        };
        let _ = writeln!(s, " {tag:<2} {row}");
    }
    s.push_str("COLUMNS\n");
    for (j, col) in col_names.iter().enumerate() {
        let mut entry = |row: &str, v: f64| {
            let _ = writeln!(s, "    {col:<8}  {row:<8}  {:>12}", fit12(v));
        };
        if lp.objective[j] != 0.0 {
            entry("COST", lp.objective[j]);
        }
        for (i, r) in lp.rows.iter().enumerate() {
            if r[j] != 0.0 {
                entry(&row_names[i], r[j]);
            }
        }
    }
    s.push_str("RHS\n");
    for (b, row) in lp.rhs.iter().zip(row_names) {
        if *b != 0.0 {
            let _ = writeln!(s, "    {:<8}  {row:<8}  {:>12}", "RHS", fit12(*b));
        }
    }
    s.push_str("ENDATA\n");
    s
}
