//! Line-based options files: `Name = value`, `#` starts a comment.
//!
//! Values are numbers, bracketed vectors (`[1e-6, 1e-8]`), matrices with rows
//! separated by `;`, the empty value `[]`, or words (`on`, `arnoldi`,
//! optionally quoted).

use super::value::{NumArray, OptionValue};
use super::OptionsError;

/// Parses an options file into `(name, value)` pairs in file order.
pub fn parse_options_file(text: &str) -> Result<Vec<(String, OptionValue)>, OptionsError> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = strip_comment(raw).trim();
        if line.is_empty() {
            continue;
        }
        let (name, value) = line.split_once('=').ok_or_else(|| OptionsError::Parse {
            line: i + 1,
            message: format!("expected 'Name = value', found '{line}'"),
        })?;
        let name = name.trim();
        if name.is_empty() || !name.chars().all(|c| c.is_ascii_alphanumeric() || c == '_') {
            return Err(OptionsError::Parse {
                line: i + 1,
                message: format!("invalid option name '{name}'"),
            });
        }
        let value = parse_value(value).map_err(|message| OptionsError::Parse {
            line: i + 1,
            message,
        })?;
        out.push((name.to_string(), value));
    }
    Ok(out)
}

fn strip_comment(line: &str) -> &str {
    let mut quote = None;
    for (i, c) in line.char_indices() {
        match (quote, c) {
            (None, '\'' | '"') => quote = Some(c),
            (Some(q), c) if c == q => quote = None,
            (None, '#') => return &line[..i],
            _ => {}
        }
    }
    line
}

/// Parses a single value as written in an options file or on the command line.
pub fn parse_value(s: &str) -> Result<OptionValue, String> {
    let s = s.trim();
    if s.is_empty() {
        return Err("missing value".into());
    }
    if let Some(inner) = s.strip_prefix('[') {
        let inner = inner
            .strip_suffix(']')
            .ok_or_else(|| format!("unterminated bracket in '{s}'"))?;
        return parse_array(inner);
    }
    for q in ['\'', '"'] {
        if let Some(inner) = s.strip_prefix(q) {
            let inner = inner
                .strip_suffix(q)
                .ok_or_else(|| format!("unterminated quote in '{s}'"))?;
            return Ok(OptionValue::Text(inner.to_string()));
        }
    }
    if let Ok(x) = s.parse::<f64>() {
        return Ok(OptionValue::from(x));
    }
    Ok(OptionValue::Text(s.to_string()))
}

fn parse_array(inner: &str) -> Result<OptionValue, String> {
    if inner.trim().is_empty() {
        return Ok(OptionValue::Empty);
    }
    let rows: Vec<Vec<f64>> = inner
        .split(';')
        .map(|row| {
            row.split(|c: char| c == ',' || c.is_whitespace())
                .filter(|t| !t.is_empty())
                .map(|t| t.parse::<f64>().map_err(|_| format!("invalid number '{t}'")))
                .collect::<Result<Vec<_>, _>>()
        })
        .collect::<Result<_, _>>()?;
    let cols = rows[0].len();
    if rows.iter().any(|r| r.len() != cols) || cols == 0 {
        return Err("matrix rows have different lengths".into());
    }
    if rows.len() == 1 {
        return Ok(OptionValue::from(rows.into_iter().next().unwrap()));
    }
    let nrows = rows.len();
    let mut data = Vec::with_capacity(nrows * cols);
    for c in 0..cols {
        for row in &rows {
            data.push(row[c]);
        }
    }
    Ok(OptionValue::Num(NumArray::matrix(nrows, cols, data)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_file() {
        let text = "# tolerances\nAbsTol = [1e-6, 1e-8]\nRelTol=1e-4 # tight\n\nMatrixFunctions = arnoldi\nStats = on\nOutputSel = []\nName = 'a # b'\n";
        let parsed = parse_options_file(text).unwrap();
        assert_eq!(parsed[0], ("AbsTol".into(), OptionValue::from(vec![1e-6, 1e-8])));
        assert_eq!(parsed[1], ("RelTol".into(), OptionValue::from(1e-4)));
        assert_eq!(parsed[2].1, OptionValue::from("arnoldi"));
        assert_eq!(parsed[3].1, OptionValue::from("on"));
        assert_eq!(parsed[4].1, OptionValue::Empty);
        assert_eq!(parsed[5].1, OptionValue::from("a # b"));
    }

    #[test]
    fn matrix_values() {
        let v = parse_value("[1 2; 3 4]").unwrap();
        assert_eq!(v, OptionValue::Num(NumArray::matrix(2, 2, vec![1.0, 3.0, 2.0, 4.0])));
        assert!(parse_value("[1 2; 3]").is_err());
    }

    #[test]
    fn reports_line_numbers() {
        let err = parse_options_file("AbsTol = 1\nbroken line\n").unwrap_err();
        assert_eq!(
            err,
            OptionsError::Parse {
                line: 2,
                message: "expected 'Name = value', found 'broken line'".into()
            }
        );
    }
}
