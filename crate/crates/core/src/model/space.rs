//! Hierarchical (conditional) hyperparameter search spaces.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::value::{Config, HpValue};
use crate::error::{not_found, validation, Error, Result};

/// Value domain of a hyperparameter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Domain {
    #[serde(alias = "numeric-continuous")]
    Float {
        lower: f64,
        upper: f64,
        #[serde(default, skip_serializing_if = "is_false")]
        log: bool,
    },
    #[serde(alias = "numeric-integer")]
    Integer {
        lower: i64,
        upper: i64,
        #[serde(default, skip_serializing_if = "is_false")]
        log: bool,
    },
    Categorical { choices: Vec<HpValue> },
}

fn is_false(b: &bool) -> bool {
    !*b
}

impl Domain {
    pub fn is_numeric(&self) -> bool {
        !matches!(self, Domain::Categorical { .. })
    }

    /// `(lower, upper, log)` for numeric domains.
    pub fn bounds(&self) -> Option<(f64, f64, bool)> {
        match *self {
            Domain::Float { lower, upper, log } => Some((lower, upper, log)),
            Domain::Integer { lower, upper, log } => Some((lower as f64, upper as f64, log)),
            Domain::Categorical { .. } => None,
        }
    }

    pub fn choices(&self) -> Option<&[HpValue]> {
        match self {
            Domain::Categorical { choices } => Some(choices),
            _ => None,
        }
    }

    /// Position of `value` among the categorical choices.
    pub fn choice_index(&self, value: &HpValue) -> Option<usize> {
        self.choices()?.iter().position(|c| c.matches(value))
    }

    pub fn contains(&self, value: &HpValue) -> bool {
        match *self {
            Domain::Float { lower, upper, .. } => value
                .as_f64()
                .is_some_and(|v| v.is_finite() && v >= lower && v <= upper),
            Domain::Integer { lower, upper, .. } => match value {
                HpValue::Int(v) => *v >= lower && *v <= upper,
                HpValue::Float(v) => {
                    libm::trunc(*v) == *v && *v >= lower as f64 && *v <= upper as f64
                }
                _ => false,
            },
            Domain::Categorical { .. } => self.choice_index(value).is_some(),
        }
    }

    fn kind_name(&self) -> &'static str {
        match self {
            Domain::Float { .. } => "float",
            Domain::Integer { .. } => "integer",
            Domain::Categorical { .. } => "categorical",
        }
    }
}

/// Activation rule: the hyperparameter is active only when `parent` is
/// active and set to `value`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Condition {
    pub parent: String,
    pub value: HpValue,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hyperparameter {
    pub name: String,
    #[serde(flatten)]
    pub domain: Domain,
    pub default: HpValue,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub condition: Option<Condition>,
}

impl Hyperparameter {
    pub fn float(name: &str, lower: f64, upper: f64, default: f64) -> Self {
        Hyperparameter {
            name: name.into(),
            domain: Domain::Float {
                lower,
                upper,
                log: false,
            },
            default: HpValue::Float(default),
            condition: None,
        }
    }

    pub fn integer(name: &str, lower: i64, upper: i64, default: i64) -> Self {
        Hyperparameter {
            name: name.into(),
            domain: Domain::Integer {
                lower,
                upper,
                log: false,
            },
            default: HpValue::Int(default),
            condition: None,
        }
    }

    pub fn categorical(name: &str, choices: &[&str], default: &str) -> Self {
        Hyperparameter {
            name: name.into(),
            domain: Domain::Categorical {
                choices: choices.iter().map(|c| HpValue::from(*c)).collect(),
            },
            default: HpValue::from(default),
            condition: None,
        }
    }

    pub fn with_condition(mut self, parent: &str, value: impl Into<HpValue>) -> Self {
        self.condition = Some(Condition {
            parent: parent.into(),
            value: value.into(),
        });
        self
    }

    pub fn with_log(mut self) -> Self {
        match &mut self.domain {
            Domain::Float { log, .. } | Domain::Integer { log, .. } => *log = true,
            Domain::Categorical { .. } => {}
        }
        self
    }

    fn validate(&self) -> Result<()> {
        let ctx = || format!("hyperparameter `{}`", self.name);
        if self.name.is_empty() {
            return Err(validation("hyperparameter", "empty name"));
        }
        match &self.domain {
            Domain::Float { lower, upper, log } => {
                if !(lower.is_finite() && upper.is_finite() && lower < upper) {
                    return Err(validation(ctx(), "requires finite lower < upper"));
                }
                if *log && *lower <= 0.0 {
                    return Err(validation(ctx(), "log scale requires lower > 0"));
                }
            }
            Domain::Integer { lower, upper, log } => {
                if lower >= upper {
                    return Err(validation(ctx(), "requires lower < upper"));
                }
                if *log && *lower <= 0 {
                    return Err(validation(ctx(), "log scale requires lower > 0"));
                }
            }
            Domain::Categorical { choices } => {
                if choices.is_empty() {
                    return Err(validation(ctx(), "categorical needs at least one choice"));
                }
                for (i, c) in choices.iter().enumerate() {
                    if choices[..i].iter().any(|p| p.matches(c)) {
                        return Err(validation(ctx(), format!("duplicate choice `{c}`")));
                    }
                }
            }
        }
        if !self.domain.contains(&self.default) {
            return Err(validation(
                ctx(),
                format!("default `{}` outside its domain", self.default),
            ));
        }
        Ok(())
    }
}

/// One step of a declared pipeline skeleton: the step name and the
/// algorithms the optimizer may choose for it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TemplateStep {
    pub step: String,
    pub choices: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct SearchSpace {
    pub hyperparameters: Vec<Hyperparameter>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub structure_template: Option<Vec<TemplateStep>>,
}

impl SearchSpace {
    pub fn new(hyperparameters: Vec<Hyperparameter>) -> Result<Self> {
        let space = SearchSpace {
            hyperparameters,
            structure_template: None,
        };
        space.validate()?;
        Ok(space)
    }

    pub fn len(&self) -> usize {
        self.hyperparameters.len()
    }

    pub fn is_empty(&self) -> bool {
        self.hyperparameters.is_empty()
    }

    pub fn get(&self, name: &str) -> Option<&Hyperparameter> {
        self.hyperparameters.iter().find(|h| h.name == name)
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.hyperparameters.iter().position(|h| h.name == name)
    }

    /// Checks name uniqueness, per-hyperparameter domains, condition targets
    /// and that the condition graph is a forest.
    pub fn validate(&self) -> Result<()> {
        let mut seen = BTreeSet::new();
        for hp in &self.hyperparameters {
            hp.validate()?;
            if !seen.insert(hp.name.as_str()) {
                return Err(validation(
                    format!("hyperparameter `{}`", hp.name),
                    "duplicate name",
                ));
            }
        }
        for hp in &self.hyperparameters {
            if let Some(cond) = &hp.condition {
                let parent = self.get(&cond.parent).ok_or_else(|| {
                    validation(
                        format!("hyperparameter `{}`", hp.name),
                        format!("condition references unknown `{}`", cond.parent),
                    )
                })?;
                if !parent.domain.contains(&cond.value) {
                    return Err(validation(
                        format!("hyperparameter `{}`", hp.name),
                        format!(
                            "condition value `{}` outside the domain of `{}`",
                            cond.value, cond.parent
                        ),
                    ));
                }
            }
        }
        for hp in &self.hyperparameters {
            self.depth(&hp.name)?;
        }
        Ok(())
    }

    /// Depth in the condition tree: unconditioned hyperparameters have depth
    /// 1, each condition hop adds one.
    pub fn depth(&self, name: &str) -> Result<usize> {
        let mut current = self
            .get(name)
            .ok_or_else(|| not_found("hyperparameter", name))?;
        let mut depth = 1;
        while let Some(cond) = &current.condition {
            depth += 1;
            if depth > self.hyperparameters.len() + 1 {
                return Err(validation(
                    format!("hyperparameter `{name}`"),
                    "condition graph contains a cycle",
                ));
            }
            current = self
                .get(&cond.parent)
                .ok_or_else(|| not_found("hyperparameter", cond.parent.as_str()))?;
        }
        Ok(depth)
    }

    /// Depths of all hyperparameters, in declaration order.
    pub fn depths(&self) -> Result<Vec<usize>> {
        self.hyperparameters
            .iter()
            .map(|h| self.depth(&h.name))
            .collect()
    }

    /// Whether `name` is active under `config`: every ancestor condition
    /// must be satisfied by the values present in the config.
    pub fn is_active(&self, name: &str, config: &Config) -> bool {
        let mut current = match self.get(name) {
            Some(h) => h,
            None => return false,
        };
        let mut hops = 0;
        while let Some(cond) = &current.condition {
            hops += 1;
            if hops > self.hyperparameters.len() {
                return false;
            }
            match config.get(&cond.parent) {
                Some(v) if v.matches(&cond.value) => {}
                _ => return false,
            }
            current = match self.get(&cond.parent) {
                Some(h) => h,
                None => return false,
            };
        }
        true
    }

    /// Checks a candidate configuration: known keys, values in domain and no
    /// inactive hyperparameter present.
    pub fn check_config(&self, context: &str, config: &Config) -> Result<()> {
        for (key, value) in config {
            let hp = self.get(key).ok_or_else(|| {
                validation(
                    format!("{context}, hyperparameter `{key}`"),
                    "not defined in the search space",
                )
            })?;
            if !hp.domain.contains(value) {
                return Err(validation(
                    format!("{context}, hyperparameter `{key}`"),
                    format!("value `{value}` outside its domain"),
                ));
            }
            if !self.is_active(key, config) {
                return Err(validation(
                    format!("{context}, hyperparameter `{key}`"),
                    "present although its condition is not met",
                ));
            }
        }
        Ok(())
    }

    /// Completes `config` with the default of every hyperparameter it lacks.
    pub fn pad_with_defaults(&self, config: &Config) -> Config {
        let mut out = config.clone();
        for hp in &self.hyperparameters {
            out.entry(hp.name.clone())
                .or_insert_with(|| hp.default.clone());
        }
        out
    }
}

/// Union of search spaces. Colliding numeric hyperparameters keep the widest
/// bounds, colliding categoricals the union of choices (first-seen order).
/// The first declaration's default, log flag and condition are kept.
pub fn merge_search_spaces(spaces: &[SearchSpace]) -> Result<SearchSpace> {
    let first = spaces
        .first()
        .ok_or_else(|| Error::Contract("at least one search space is required".into()))?;
    if spaces.len() == 1 {
        return Ok(first.clone());
    }
    let mut merged: Vec<Hyperparameter> = Vec::new();
    let mut index: BTreeMap<String, usize> = BTreeMap::new();
    let mut template: Option<Vec<TemplateStep>> = None;
    for space in spaces {
        for hp in &space.hyperparameters {
            match index.get(&hp.name) {
                None => {
                    index.insert(hp.name.clone(), merged.len());
                    merged.push(hp.clone());
                }
                Some(&i) => merge_into(&mut merged[i], hp)?,
            }
        }
        if let Some(steps) = &space.structure_template {
            let acc = template.get_or_insert_with(Vec::new);
            for step in steps {
                match acc.iter_mut().find(|s| s.step == step.step) {
                    Some(existing) => {
                        for c in &step.choices {
                            if !existing.choices.contains(c) {
                                existing.choices.push(c.clone());
                            }
                        }
                    }
                    None => acc.push(step.clone()),
                }
            }
        }
    }
    let space = SearchSpace {
        hyperparameters: merged,
        structure_template: template,
    };
    space.validate()?;
    Ok(space)
}

fn merge_into(target: &mut Hyperparameter, other: &Hyperparameter) -> Result<()> {
    let conflict = |message: String| Error::MergeConflict {
        name: target.name.clone(),
        message,
    };
    if target.condition.as_ref().map(|c| (&c.parent, &c.value))
        != other.condition.as_ref().map(|c| (&c.parent, &c.value))
    {
        return Err(conflict("conflicting activation conditions".into()));
    }
    match (&mut target.domain, &other.domain) {
        (
            Domain::Float { lower, upper, .. },
            Domain::Float {
                lower: l2,
                upper: u2,
                ..
            },
        ) => {
            *lower = lower.min(*l2);
            *upper = upper.max(*u2);
        }
        (
            Domain::Integer { lower, upper, .. },
            Domain::Integer {
                lower: l2,
                upper: u2,
                ..
            },
        ) => {
            *lower = (*lower).min(*l2);
            *upper = (*upper).max(*u2);
        }
        (Domain::Categorical { choices }, Domain::Categorical { choices: c2 }) => {
            for c in c2 {
                if !choices.iter().any(|x| x.matches(c)) {
                    choices.push(c.clone());
                }
            }
        }
        (a, b) => {
            return Err(conflict(format!(
                "incompatible kinds {} and {}",
                a.kind_name(),
                b.kind_name()
            )))
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn chain() -> SearchSpace {
        SearchSpace::new(vec![
            Hyperparameter::categorical("a", &["x", "y"], "x"),
            Hyperparameter::categorical("b", &["p", "q"], "p").with_condition("a", "x"),
            Hyperparameter::categorical("c", &["u", "v"], "u").with_condition("b", "p"),
            Hyperparameter::float("d", 0.0, 1.0, 0.5).with_condition("c", "u"),
        ])
        .unwrap()
    }

    #[test]
    fn depth_counts_condition_hops() {
        let s = chain();
        assert_eq!(s.depth("a").unwrap(), 1);
        assert_eq!(s.depth("b").unwrap(), 2);
        assert_eq!(s.depth("d").unwrap(), 4);
        assert!(matches!(s.depth("zz"), Err(Error::NotFound { .. })));
    }

    #[test]
    fn cyclic_conditions_are_rejected() {
        let r = SearchSpace::new(vec![
            Hyperparameter::categorical("a", &["x"], "x").with_condition("b", "x"),
            Hyperparameter::categorical("b", &["x"], "x").with_condition("a", "x"),
        ]);
        assert!(matches!(r, Err(Error::Validation { .. })));
    }

    #[test]
    fn pad_with_defaults_examples() {
        let s = SearchSpace::new(vec![Hyperparameter::float("a", 0.0, 1.0, 0.5)]).unwrap();
        let padded = s.pad_with_defaults(&Config::new());
        assert_eq!(padded.get("a"), Some(&HpValue::Float(0.5)));

        let s = SearchSpace::new(vec![
            Hyperparameter::integer("a", 0, 5, 0),
            Hyperparameter::categorical("b", &["x", "y"], "x"),
        ])
        .unwrap();
        let mut cfg = Config::new();
        cfg.insert("a".into(), HpValue::Int(1));
        let padded = s.pad_with_defaults(&cfg);
        assert_eq!(padded.get("a"), Some(&HpValue::Int(1)));
        assert_eq!(padded.get("b"), Some(&HpValue::from("x")));
        assert_eq!(s.pad_with_defaults(&padded), padded);
    }

    #[test]
    fn check_config_flags_bounds_and_inactive() {
        let s = SearchSpace::new(vec![
            Hyperparameter::float("lr", 0.0, 10.0, 1.0),
            Hyperparameter::categorical("k", &["rbf", "lin"], "rbf"),
            Hyperparameter::float("gamma", 0.0, 1.0, 0.1).with_condition("k", "rbf"),
        ])
        .unwrap();
        let mut cfg = Config::new();
        cfg.insert("lr".into(), HpValue::Int(15));
        let err = s.check_config("candidate `c1`", &cfg).unwrap_err();
        assert!(alloc::format!("{err}").contains("lr"));

        let mut cfg = Config::new();
        cfg.insert("k".into(), "lin".into());
        cfg.insert("gamma".into(), HpValue::Float(0.3));
        assert!(s.check_config("c", &cfg).is_err());
        cfg.insert("k".into(), "rbf".into());
        assert!(s.check_config("c", &cfg).is_ok());
    }

    #[test]
    fn merge_widens_and_unions() {
        let a = SearchSpace::new(vec![Hyperparameter::float("a", 0.0, 5.0, 1.0)]).unwrap();
        let b = SearchSpace::new(vec![
            Hyperparameter::float("a", 0.0, 10.0, 2.0),
            Hyperparameter::categorical("b", &["x"], "x"),
        ])
        .unwrap();
        assert_eq!(merge_search_spaces(core::slice::from_ref(&a)).unwrap(), a);
        let m = merge_search_spaces(&[a, b]).unwrap();
        assert_eq!(m.len(), 2);
        assert_eq!(m.get("a").unwrap().domain.bounds(), Some((0.0, 10.0, false)));

        let c = SearchSpace::new(vec![Hyperparameter::categorical("a", &["x"], "x")]).unwrap();
        let d = SearchSpace::new(vec![Hyperparameter::float("a", 0.0, 1.0, 0.0)]).unwrap();
        assert!(matches!(
            merge_search_spaces(&[c, d]),
            Err(Error::MergeConflict { .. })
        ));
    }

    #[test]
    fn depth_strictly_increases_along_conditions() {
        let s = chain();
        for hp in &s.hyperparameters {
            if let Some(c) = &hp.condition {
                assert_eq!(s.depth(&hp.name).unwrap(), s.depth(&c.parent).unwrap() + 1);
            }
        }
    }
}
