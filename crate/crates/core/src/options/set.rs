use std::collections::BTreeMap;

use super::catalog::{catalog, generic_catalog, Catalog, IntegratorKind, OptionDesc};
use super::types::Checked;
use super::value::{FunctionHandle, NumArray, OptionValue};
use super::OptionsError;

/// User-supplied options, checked against the catalog on every insertion.
///
/// A set created with [`OptionsSet::new`] is not bound to an integrator and
/// accepts any option known to some integrator; [`OptionsSet::validate`] then
/// resolves the integrator from the `Integrator` option.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct OptionsSet {
    integrator: Option<IntegratorKind>,
    values: Vec<(&'static str, OptionValue)>,
}

impl OptionsSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn for_integrator(kind: IntegratorKind) -> Self {
        Self {
            integrator: Some(kind),
            values: Vec::new(),
        }
    }

    pub fn integrator(&self) -> Option<IntegratorKind> {
        self.integrator
    }

    fn catalog(&self) -> &'static Catalog {
        match self.integrator {
            Some(k) => catalog(k),
            None => generic_catalog(),
        }
    }

    /// Builder form of [`OptionsSet::set_mut`].
    pub fn set(mut self, name: &str, value: impl Into<OptionValue>) -> Result<Self, OptionsError> {
        self.set_mut(name, value)?;
        Ok(self)
    }

    /// Sets one option. A later set of the same name replaces the earlier
    /// value; setting the empty value `[]` removes it.
    pub fn set_mut(&mut self, name: &str, value: impl Into<OptionValue>) -> Result<(), OptionsError> {
        let value = value.into();
        let cat = self.catalog();
        let desc = cat.get(name).ok_or_else(|| OptionsError::UnknownOption {
            name: name.to_string(),
            integrator: cat.name().to_string(),
        })?;
        if value == OptionValue::Empty {
            self.values.retain(|(n, _)| *n != desc.name);
            return Ok(());
        }
        if self.integrator.is_none() && !desc.name.eq_ignore_ascii_case("Integrator") {
            self.check_unbound(desc, &value)?;
        } else {
            check(desc, &value)?;
        }
        match self.values.iter_mut().find(|(n, _)| *n == desc.name) {
            Some(slot) => slot.1 = value,
            None => self.values.push((desc.name, value)),
        }
        Ok(())
    }

    /// An unbound set checks against the named integrator when `Integrator`
    /// is set; otherwise any integrator accepting the value will do.
    fn check_unbound(&self, desc: &OptionDesc, value: &OptionValue) -> Result<(), OptionsError> {
        if self.get("Integrator").is_some() {
            if let Ok(kind) = self.resolve_integrator() {
                return match catalog(kind).get(desc.name) {
                    Some(d) => check(d, value).map(drop),
                    None => check(desc, value).map(drop),
                };
            }
        }
        if check(desc, value).is_ok() {
            return Ok(());
        }
        let accepted = IntegratorKind::ALL
            .iter()
            .filter_map(|k| catalog(*k).get(desc.name))
            .any(|d| d.ty.check(value).is_some());
        if accepted {
            Ok(())
        } else {
            check(desc, value).map(drop)
        }
    }

    pub fn get(&self, name: &str) -> Option<&OptionValue> {
        self.values
            .iter()
            .find(|(n, _)| n.eq_ignore_ascii_case(name))
            .map(|(_, v)| v)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&'static str, &OptionValue)> {
        self.values.iter().map(|(n, v)| (*n, v))
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Rebinds the set to another integrator. Fails if a stored option does
    /// not exist there or its value does not fit the new type.
    pub fn with_integrator(self, kind: IntegratorKind) -> Result<Self, OptionsError> {
        let mut out = OptionsSet::for_integrator(kind);
        let mut errors = Vec::new();
        for (name, value) in self.values {
            if let Err(e) = out.set_mut(name, value) {
                errors.push(e);
            }
        }
        OptionsError::collect(errors)?;
        Ok(out)
    }

    /// The integrator the set will run with: the bound one, otherwise the
    /// `Integrator` option, otherwise its default.
    pub fn resolve_integrator(&self) -> Result<IntegratorKind, OptionsError> {
        if let Some(k) = self.integrator {
            return Ok(k);
        }
        let desc = generic_catalog().get("Integrator").expect("Integrator option");
        let value = self.get("Integrator").unwrap_or(&desc.default);
        match desc.ty.check(value) {
            Some(Checked::Index(i)) => Ok(IntegratorKind::ALL[i]),
            _ => Err(OptionsError::invalid(desc, value)),
        }
    }

    /// Evaluates every catalog option to its normalized value.
    pub fn validate(&self) -> Result<NormalizedOptions, OptionsError> {
        let kind = self.resolve_integrator()?;
        let cat = catalog(kind);
        let mut errors = Vec::new();
        for (name, _) in &self.values {
            if cat.get(name).is_none() {
                errors.push(OptionsError::UnknownOption {
                    name: name.to_string(),
                    integrator: kind.name().to_string(),
                });
            }
        }
        let mut values = BTreeMap::new();
        for desc in cat.options() {
            let raw = self.get(desc.name).unwrap_or(&desc.default);
            match normalize(desc, raw) {
                Ok(v) => {
                    values.insert(desc.normalized_name(), v);
                }
                Err(e) => errors.push(e),
            }
        }
        OptionsError::collect(errors)?;
        if kind.is_constant_step() {
            values.insert("hConstant", NormValue::Index(1));
        }
        Ok(NormalizedOptions {
            integrator: kind,
            values,
        })
    }
}

fn check(desc: &OptionDesc, value: &OptionValue) -> Result<Checked, OptionsError> {
    desc.ty
        .check(value)
        .ok_or_else(|| OptionsError::invalid(desc, value))
}

fn normalize(desc: &OptionDesc, value: &OptionValue) -> Result<NormValue, OptionsError> {
    if *value == OptionValue::Empty {
        return Ok(NormValue::Empty);
    }
    Ok(match check(desc, value)? {
        Checked::Num(a) => NormValue::Num(a),
        Checked::Index(i) => NormValue::Index(i),
        Checked::Text(s) => NormValue::Text(s),
        Checked::Struct => NormValue::Struct(value.clone()),
        Checked::Handle => match value {
            OptionValue::Handle(h) => NormValue::Handle(h.clone()),
            _ => unreachable!("handle check on non-handle"),
        },
    })
}

/// A normalized option value: lists and booleans become indices.
#[derive(Debug, Clone, PartialEq)]
pub enum NormValue {
    Num(NumArray),
    Index(usize),
    Text(String),
    Struct(OptionValue),
    Handle(FunctionHandle),
    Empty,
}

/// All options of one integrator with defaults filled in and renames
/// applied.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalizedOptions {
    integrator: IntegratorKind,
    values: BTreeMap<&'static str, NormValue>,
}

impl NormalizedOptions {
    pub fn integrator(&self) -> IntegratorKind {
        self.integrator
    }

    pub fn get(&self, name: &str) -> Option<&NormValue> {
        self.values.get(name).or_else(|| {
            self.values
                .iter()
                .find(|(k, _)| k.eq_ignore_ascii_case(name))
                .map(|(_, v)| v)
        })
    }

    pub fn iter(&self) -> impl Iterator<Item = (&'static str, &NormValue)> {
        self.values.iter().map(|(k, v)| (*k, v))
    }

    /// Index of a list or boolean option, if the option holds one.
    pub fn index(&self, name: &str) -> Option<usize> {
        match self.get(name) {
            Some(NormValue::Index(i)) => Some(*i),
            _ => None,
        }
    }

    /// Boolean option as `bool`; missing or non-boolean values are false.
    pub fn flag(&self, name: &str) -> bool {
        self.index(name) == Some(1)
    }

    pub fn num(&self, name: &str) -> Option<&NumArray> {
        match self.get(name) {
            Some(NormValue::Num(a)) => Some(a),
            _ => None,
        }
    }

    pub fn scalar(&self, name: &str) -> Option<f64> {
        self.num(name).and_then(NumArray::as_scalar)
    }

    pub fn handle(&self, name: &str) -> Option<&FunctionHandle> {
        match self.get(name) {
            Some(NormValue::Handle(h)) => Some(h),
            _ => None,
        }
    }

    /// Name of the selected list entry.
    pub fn list_name(&self, name: &str) -> Option<String> {
        let i = self.index(name)?;
        let desc = catalog(self.integrator).get(name)?;
        desc.ty.selection_entries().map(|e| e[i].name.clone())
    }

    /// The numeric value attached to the selected list entry, if the list
    /// defines one.
    pub fn list_value(&self, name: &str) -> Option<f64> {
        let i = self.index(name)?;
        let desc = catalog(self.integrator).get(name)?;
        desc.ty.selection_entries().and_then(|e| e[i].value)
    }

    /// Converts back into a raw set that validates to `self`.
    pub fn raw(&self) -> OptionsSet {
        let cat = catalog(self.integrator);
        let mut set = OptionsSet::for_integrator(self.integrator);
        for desc in cat.options() {
            let value = match self.values.get(desc.normalized_name()) {
                Some(NormValue::Num(a)) => OptionValue::Num(a.clone()),
                Some(NormValue::Index(i)) => OptionValue::from(*i as f64),
                Some(NormValue::Text(s)) => OptionValue::Text(s.clone()),
                Some(NormValue::Struct(v)) => v.clone(),
                Some(NormValue::Handle(h)) => OptionValue::Handle(h.clone()),
                Some(NormValue::Empty) | None => continue,
            };
            set.values.push((desc.name, value));
        }
        set
    }
}
