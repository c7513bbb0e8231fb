//! Model grammar: comma-separated effects, interactions joined by colons.
//! Predictors are named by 1-based position or by column name, so
//! `"1,2,1:2"` is the two-way model in the first two predictors.

use crate::error::{CliError, CliResult};

/// Parses a model string into 0-based effect lists.
pub fn parse_model(text: &str, names: &[String]) -> CliResult<Vec<Vec<usize>>> {
    let mut effects = Vec::new();
    for term in text.split(',') {
        let term = term.trim();
        if term.is_empty() {
            return Err(CliError::input(format!("empty term in model '{text}'")));
        }
        let mut effect = Vec::new();
        for factor in term.split(':') {
            let factor = factor.trim();
            let j = match factor.parse::<usize>() {
                Ok(k) if (1..=names.len()).contains(&k) => k - 1,
                Ok(k) => {
                    return Err(CliError::input(format!(
                        "predictor {k} out of range 1..={} in model term '{term}'",
                        names.len()
                    )))
                }
                Err(_) => names.iter().position(|n| n == factor).ok_or_else(|| {
                    CliError::input(format!("unknown predictor '{factor}' in model term '{term}'"))
                })?,
            };
            if effect.contains(&j) {
                return Err(CliError::input(format!("predictor repeated in model term '{term}'")));
            }
            effect.push(j);
        }
        effects.push(effect);
    }
    Ok(effects)
}
