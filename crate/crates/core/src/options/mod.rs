//! Typed option catalog with validation, defaults and help texts.

mod catalog;
mod config;
mod info;
mod set;
mod types;
mod value;

use thiserror::Error;

pub use catalog::{catalog, catalog_by_name, generic_catalog, Catalog, IntegratorKind, OptionDesc};
pub use config::{parse_options_file, parse_value};
pub use info::info;
pub use set::{NormValue, NormalizedOptions, OptionsSet};
pub use types::{Alternative, Checked, Kind, ListEntry, OptionType, TypeError};
pub use value::{format_number, FunctionHandle, NumArray, OptionValue};

#[derive(Debug, Clone, Error, PartialEq)]
pub enum OptionsError {
    #[error("unknown option '{name}' for integrator {integrator}")]
    UnknownOption { name: String, integrator: String },

    #[error("invalid value {value} for option {name}: expected {expected}")]
    InvalidValue {
        name: String,
        expected: String,
        value: String,
    },

    #[error("unknown integrator '{0}'")]
    UnknownIntegrator(String),

    #[error("{}", .0.iter().map(|e| e.to_string()).collect::<Vec<_>>().join("\n"))]
    Aggregate(Vec<OptionsError>),

    #[error("options file line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("option {name}: {message}")]
    Semantic { name: String, message: String },
}

impl OptionsError {
    fn invalid(desc: &OptionDesc, value: &OptionValue) -> Self {
        OptionsError::InvalidValue {
            name: desc.name.to_string(),
            expected: desc.ty.render(&desc.default),
            value: value.to_string(),
        }
    }

    fn collect(mut errors: Vec<OptionsError>) -> Result<(), OptionsError> {
        match errors.len() {
            0 => Ok(()),
            1 => Err(errors.pop().unwrap()),
            _ => Err(OptionsError::Aggregate(errors)),
        }
    }
}
