use super::catalog::{catalog_by_name, OptionDesc};
use super::OptionsError;

const WIDTH: usize = 76;

/// Help text for an integrator's options.
///
/// Without a name, one summary line per option. With a name, that option's
/// summary, long description and cross references; `"-"` prints the long
/// form of every option.
pub fn info(integrator: &str, option: Option<&str>) -> Result<String, OptionsError> {
    let cat = catalog_by_name(integrator)?;
    match option.map(str::trim) {
        None | Some("") => {
            let mut out = String::new();
            for desc in cat.options() {
                out.push_str(&desc.summary_line());
                out.push('\n');
            }
            Ok(out)
        }
        Some("-") => Ok(cat
            .options()
            .iter()
            .map(long_form)
            .collect::<Vec<_>>()
            .join("\n")),
        Some(name) => {
            let desc = cat.get(name).ok_or_else(|| OptionsError::UnknownOption {
                name: name.to_string(),
                integrator: cat.name().to_string(),
            })?;
            Ok(long_form(desc))
        }
    }
}

fn long_form(desc: &OptionDesc) -> String {
    let mut out = desc.summary_line();
    out.push_str("\n\n");
    for line in wrap(desc.long, WIDTH) {
        out.push_str("    ");
        out.push_str(&line);
        out.push('\n');
    }
    if let Some(to) = desc.rename_to {
        out.push_str(&format!("\n    Evaluated as {to} during integration.\n"));
    }
    if !desc.see_also.is_empty() {
        out.push_str(&format!("\n    See also: {}\n", desc.see_also.join(", ")));
    }
    out
}

fn wrap(text: &str, width: usize) -> Vec<String> {
    let mut lines = Vec::new();
    let mut current = String::new();
    for word in text.split_whitespace() {
        if !current.is_empty() && current.len() + 1 + word.len() > width {
            lines.push(std::mem::take(&mut current));
        }
        if !current.is_empty() {
            current.push(' ');
        }
        current.push_str(word);
    }
    if !current.is_empty() {
        lines.push(current);
    }
    lines
}
