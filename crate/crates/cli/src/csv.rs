//! Single-column integer CSV.

use crate::error::CliError;

/// Parses one integer per line. A first line reading `y` is taken as a
/// header; blank lines are skipped.
pub fn parse_series(text: &str) -> Result<Vec<i64>, CliError> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let tok = line.trim();
        if tok.is_empty() || (i == 0 && tok == "y") {
            continue;
        }
        let v = tok
            .parse::<i64>()
            .map_err(|_| CliError::Data(format!("line {}: expected an integer, found {tok:?}", i + 1)))?;
        out.push(v);
    }
    if out.is_empty() {
        return Err(CliError::Data("input contains no observations".into()));
    }
    Ok(out)
}

pub fn write_series(y: &[i64], header: bool) -> String {
    let mut s = String::with_capacity(y.len() * 4 + 2);
    if header {
        s.push_str("y\n");
    }
    for v in y {
        s.push_str(&v.to_string());
        s.push('\n');
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn header_and_errors() {
        assert_eq!(parse_series("y\n3\n-2\n\n0\n").unwrap(), vec![3, -2, 0]);
        let err = parse_series("1\n2\n2.5\n").unwrap_err();
        assert!(err.to_string().contains("line 3"), "{err}");
        assert!(parse_series("y\n").is_err());
        assert_eq!(parse_series(&write_series(&[1, -4], true)).unwrap(), vec![1, -4]);
    }
}
