//! Compact `Name` / `Name(a, b)` notation shared by model families,
//! payment schemes and tie-break policies, so configs and CLI flags can
//! name them with one string.

use crate::error::{MechError, Result};

pub(crate) fn split_call(text: &str) -> Result<(&str, Vec<f64>)> {
    let text = text.trim();
    let Some(open) = text.find('(') else {
        return Ok((text, Vec::new()));
    };
    let Some(inner) = text[open + 1..].strip_suffix(')') else {
        return Err(MechError::Config(format!(
            "unbalanced parentheses in `{text}`"
        )));
    };
    let args = if inner.trim().is_empty() {
        Vec::new()
    } else {
        inner
            .split(',')
            .map(|a| {
                a.trim().parse::<f64>().map_err(|_| {
                    MechError::Config(format!("bad number `{}` in `{text}`", a.trim()))
                })
            })
            .collect::<Result<Vec<_>>>()?
    };
    Ok((text[..open].trim(), args))
}

pub(crate) fn expect_args(name: &str, args: &[f64], n: usize) -> Result<()> {
    if args.len() != n {
        return Err(MechError::Config(format!(
            "`{name}` takes {n} argument(s), got {}",
            args.len()
        )));
    }
    Ok(())
}
