use std::any::Any;
use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

/// A dense numeric value: scalar, vector or matrix, stored column-major.
#[derive(Debug, Clone, PartialEq)]
pub struct NumArray {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl NumArray {
    pub fn scalar(x: f64) -> Self {
        Self {
            rows: 1,
            cols: 1,
            data: vec![x],
        }
    }

    /// A row vector.
    pub fn vector(data: Vec<f64>) -> Self {
        Self {
            rows: 1,
            cols: data.len(),
            data,
        }
    }

    pub fn matrix(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        assert_eq!(rows * cols, data.len(), "matrix data length");
        Self { rows, cols, data }
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn is_scalar(&self) -> bool {
        self.rows == 1 && self.cols == 1
    }

    pub fn is_vector(&self) -> bool {
        !self.is_empty() && (self.rows == 1 || self.cols == 1)
    }

    pub fn as_scalar(&self) -> Option<f64> {
        self.is_scalar().then(|| self.data[0])
    }
}

/// A type-erased callable carried by a `function_handle` option.
///
/// The consumer downcasts to the concrete callable type it expects, e.g. an
/// `Arc<dyn Fn(f64, &DVector<f64>) -> DMatrix<f64>>` for `Jacobian`.
#[derive(Clone)]
pub struct FunctionHandle {
    name: String,
    inner: Arc<dyn Any + Send + Sync>,
}

impl FunctionHandle {
    pub fn new<T: Any + Send + Sync>(name: impl Into<String>, value: T) -> Self {
        Self {
            name: name.into(),
            inner: Arc::new(value),
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn downcast_ref<T: Any>(&self) -> Option<&T> {
        self.inner.downcast_ref::<T>()
    }
}

impl fmt::Debug for FunctionHandle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "@{}", self.name)
    }
}

impl PartialEq for FunctionHandle {
    fn eq(&self, other: &Self) -> bool {
        Arc::ptr_eq(&self.inner, &other.inner)
    }
}

/// A raw option value as supplied by the user.
#[derive(Debug, Clone, PartialEq)]
pub enum OptionValue {
    Num(NumArray),
    Bool(bool),
    Text(String),
    Struct(BTreeMap<String, OptionValue>),
    Handle(FunctionHandle),
    /// The empty value `[]`: the option is unset and falls back to an automatic choice.
    Empty,
}

impl OptionValue {
    pub fn as_num(&self) -> Option<&NumArray> {
        match self {
            OptionValue::Num(a) => Some(a),
            _ => None,
        }
    }

    pub fn as_scalar(&self) -> Option<f64> {
        self.as_num().and_then(NumArray::as_scalar)
    }
}

impl From<f64> for OptionValue {
    fn from(x: f64) -> Self {
        OptionValue::Num(NumArray::scalar(x))
    }
}

impl From<i32> for OptionValue {
    fn from(x: i32) -> Self {
        OptionValue::Num(NumArray::scalar(x as f64))
    }
}

impl From<usize> for OptionValue {
    fn from(x: usize) -> Self {
        OptionValue::Num(NumArray::scalar(x as f64))
    }
}

impl From<Vec<f64>> for OptionValue {
    fn from(v: Vec<f64>) -> Self {
        OptionValue::Num(NumArray::vector(v))
    }
}

impl From<&[f64]> for OptionValue {
    fn from(v: &[f64]) -> Self {
        OptionValue::Num(NumArray::vector(v.to_vec()))
    }
}

impl From<NumArray> for OptionValue {
    fn from(a: NumArray) -> Self {
        OptionValue::Num(a)
    }
}

impl From<bool> for OptionValue {
    fn from(b: bool) -> Self {
        OptionValue::Bool(b)
    }
}

impl From<&str> for OptionValue {
    fn from(s: &str) -> Self {
        OptionValue::Text(s.to_string())
    }
}

impl From<String> for OptionValue {
    fn from(s: String) -> Self {
        OptionValue::Text(s)
    }
}

impl From<FunctionHandle> for OptionValue {
    fn from(h: FunctionHandle) -> Self {
        OptionValue::Handle(h)
    }
}

impl fmt::Display for OptionValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            OptionValue::Num(a) if a.is_scalar() => f.write_str(&format_number(a.data[0])),
            OptionValue::Num(a) => {
                f.write_str("[")?;
                for r in 0..a.rows {
                    if r > 0 {
                        f.write_str(";")?;
                    }
                    for c in 0..a.cols {
                        if c > 0 {
                            f.write_str(" ")?;
                        }
                        f.write_str(&format_number(a.data[c * a.rows + r]))?;
                    }
                }
                f.write_str("]")
            }
            OptionValue::Bool(b) => f.write_str(if *b { "'on'" } else { "'off'" }),
            OptionValue::Text(s) => write!(f, "'{s}'"),
            OptionValue::Struct(_) => f.write_str("struct"),
            OptionValue::Handle(h) => write!(f, "@{}", h.name()),
            OptionValue::Empty => f.write_str("[]"),
        }
    }
}

/// Formats a number the way `%g` with five significant digits would
/// (`1e-06`, `0.001`, `100`).
pub fn format_number(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return if x.is_nan() {
            "NaN".into()
        } else if x > 0.0 {
            "Inf".into()
        } else {
            "-Inf".into()
        };
    }
    const PRECISION: i32 = 5;
    let sci = format!("{:.*e}", (PRECISION - 1) as usize, x);
    let (mantissa, exp) = sci.split_once('e').expect("scientific format");
    let exp: i32 = exp.parse().expect("exponent");
    if !(-4..PRECISION).contains(&exp) {
        let mantissa = trim_zeros(mantissa);
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{mantissa}e{sign}{:02}", exp.abs())
    } else {
        let decimals = (PRECISION - 1 - exp).max(0) as usize;
        trim_zeros(&format!("{x:.decimals$}")).to_string()
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn g_style_formatting() {
        assert_eq!(format_number(1e-6), "1e-06");
        assert_eq!(format_number(0.001), "0.001");
        assert_eq!(format_number(100.0), "100");
        assert_eq!(format_number(1.0), "1");
        assert_eq!(format_number(2.5e7), "2.5e+07");
        assert_eq!(format_number(-0.125), "-0.125");
        assert_eq!(format_number(12345.0), "12345");
        assert_eq!(format_number(123456.0), "1.2346e+05");
    }
}
