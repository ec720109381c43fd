use std::fmt::Write;

use super::{MilpProblem, Relation, Sense};

fn valid_name(s: &str) -> bool {
    let mut chars = s.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_alphabetic() || c == '_')
        && s.len() <= 255
        && s.chars()
            .all(|c| c.is_ascii_alphanumeric() || "_.[]".contains(c))
}

fn push_terms(out: &mut String, terms: impl Iterator<Item = (f64, String)>) {
    let mut first = true;
    for (a, name) in terms {
        if a == 0.0 {
            continue;
        }
        let sign = if a < 0.0 {
            "-"
        } else if first {
            ""
        } else {
            "+"
        };
        let mag = a.abs();
        if first {
            let _ = write!(out, " {sign}{mag} {name}");
        } else {
            let _ = write!(out, " {sign} {mag} {name}");
        }
        first = false;
    }
    if first {
        out.push_str(" 0");
    }
}

/// Renders the problem in CPLEX LP text format.
pub fn to_lp_format(milp: &MilpProblem) -> String {
    let lp = &milp.lp;
    let names: Vec<String> = (0..lp.num_vars())
        .map(|j| match lp.names.get(j) {
            Some(n) if valid_name(n) => n.clone(),
            _ => format!("x{j}"),
        })
        .collect();
    let mut out = String::new();
    out.push_str(match lp.sense {
        Sense::Minimize => "Minimize\n",
        Sense::Maximize => "Maximize\n",
    });
    out.push_str(" obj:");
    push_terms(
        &mut out,
        lp.objective
            .iter()
            .enumerate()
            .map(|(j, c)| (*c, names[j].clone())),
    );
    out.push_str("\nSubject To\n");
    for (i, c) in lp.constraints.iter().enumerate() {
        let _ = write!(out, " c{i}:");
        push_terms(
            &mut out,
            c.coeffs.iter().map(|(j, a)| (*a, names[*j].clone())),
        );
        let rel = match c.relation {
            Relation::Le => "<=",
            Relation::Eq => "=",
            Relation::Ge => ">=",
        };
        let _ = writeln!(out, " {rel} {}", c.rhs);
    }
    out.push_str("Bounds\n");
    for (j, &(lo, hi)) in lp.bounds.iter().enumerate() {
        let n = &names[j];
        let _ = match (lo.is_finite(), hi.is_finite()) {
            (false, false) => writeln!(out, " {n} free"),
            (true, true) if lo == hi => writeln!(out, " {n} = {lo}"),
            (true, true) => writeln!(out, " {lo} <= {n} <= {hi}"),
            (true, false) => writeln!(out, " {n} >= {lo}"),
            (false, true) => writeln!(out, " -inf <= {n} <= {hi}"),
        };
    }
    let (bins, gens): (Vec<usize>, Vec<usize>) = milp
        .integers
        .iter()
        .partition(|&&j| lp.bounds[j] == (0.0, 1.0));
    if !gens.is_empty() {
        out.push_str("General\n");
        for j in gens {
            let _ = writeln!(out, " {}", names[j]);
        }
    }
    if !bins.is_empty() {
        out.push_str("Binary\n");
        for j in bins {
            let _ = writeln!(out, " {}", names[j]);
        }
    }
    out.push_str("End\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::milp::LinearProgram;

    #[test]
    fn renders_sections() {
        let mut lp = LinearProgram::new(Sense::Maximize);
        let a = lp.add_var("a", 0.0, 1.0, 5.0);
        let b = lp.add_var("bad name", f64::NEG_INFINITY, f64::INFINITY, -4.0);
        lp.add_constraint(vec![(a, 3.0), (b, 2.0)], Relation::Le, 4.0);
        let text = to_lp_format(&MilpProblem::new(lp, vec![a]));
        assert!(text.starts_with("Maximize\n obj: 5 a - 4 x1\n"));
        assert!(text.contains(" c0: 3 a + 2 x1 <= 4\n"));
        assert!(text.contains(" x1 free\n"));
        assert!(text.contains("Binary\n a\n"));
        assert!(text.ends_with("End\n"));
    }
}
