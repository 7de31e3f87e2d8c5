use std::fmt::Write;

use crate::problem::LinearProgram;

fn clean(name: &str, fallback: String) -> String {
    let s: String = name
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || "_.[]".contains(c) { c } else { '_' })
        .collect();
    if s.is_empty() || s.starts_with(|c: char| c.is_ascii_digit() || c == '.') {
        fallback
    } else {
        s
    }
}

fn num(v: f64) -> String {
    if v == f64::INFINITY {
        "inf".into()
    } else if v == f64::NEG_INFINITY {
        "-inf".into()
    } else {
        format!("{v}")
    }
}

fn terms(out: &mut String, coeffs: &[(usize, f64)], names: &[String]) {
    if coeffs.is_empty() {
        out.push_str(" 0 ");
        out.push_str(&names[0]);
        return;
    }
    for (k, &(j, a)) in coeffs.iter().enumerate() {
        let sign = if a < 0.0 { '-' } else { '+' };
        if k == 0 && sign == '+' {
            let _ = write!(out, " {} {}", num(a.abs()), names[j]);
        } else {
            let _ = write!(out, " {sign} {} {}", num(a.abs()), names[j]);
        }
    }
}

/// Renders the problem in CPLEX LP format.
pub fn to_lp_format(lp: &LinearProgram) -> String {
    let names: Vec<String> =
        lp.names.iter().enumerate().map(|(j, s)| clean(s, format!("x{j}"))).collect();
    let mut out = String::from("Minimize\n obj:");
    let obj: Vec<(usize, f64)> =
        lp.cost.iter().enumerate().filter(|e| *e.1 != 0.0).map(|(j, &c)| (j, c)).collect();
    terms(&mut out, &obj, &names);
    out.push_str("\nSubject To\n");
    for (i, c) in lp.ineq.iter().enumerate() {
        let label = clean(c.name.as_deref().unwrap_or(""), format!("c{i}"));
        let _ = write!(out, " {label}:");
        terms(&mut out, &c.normalized(), &names);
        let _ = writeln!(out, " <= {}", num(c.rhs));
    }
    for (i, c) in lp.eq.iter().enumerate() {
        let label = clean(c.name.as_deref().unwrap_or(""), format!("e{i}"));
        let _ = write!(out, " {label}:");
        terms(&mut out, &c.normalized(), &names);
        let _ = writeln!(out, " = {}", num(c.rhs));
    }
    out.push_str("Bounds\n");
    for (j, name) in names.iter().enumerate() {
        let (l, u) = (lp.lower[j], lp.upper[j]);
        if l == f64::NEG_INFINITY && u == f64::INFINITY {
            let _ = writeln!(out, " {name} free");
        } else if l == u {
            let _ = writeln!(out, " {name} = {}", num(l));
        } else {
            let _ = writeln!(out, " {} <= {name} <= {}", num(l), num(u));
        }
    }
    out.push_str("End\n");
    out
}
