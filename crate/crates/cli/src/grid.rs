//! Grid flags: inclusive integer ranges `a..b`, comma lists, and float
//! ranges expanded with a step count.

use serde::Serialize;

/// Cluster sizes: `5`, `1..20` (inclusive) or `2,4,8`.
pub fn parse_sizes(text: &str) -> Result<Vec<usize>, String> {
    let mut out = Vec::new();
    for part in text.split(',').map(str::trim) {
        if let Some((a, b)) = part.split_once("..") {
            let a: usize = a
                .trim()
                .parse()
                .map_err(|_| format!("bad range start in `{part}`"))?;
            let b: usize = b
                .trim()
                .trim_start_matches('=')
                .parse()
                .map_err(|_| format!("bad range end in `{part}`"))?;
            if a > b {
                return Err(format!("empty range `{part}`"));
            }
            out.extend(a..=b);
        } else {
            out.push(
                part.parse()
                    .map_err(|_| format!("`{part}` is not a size"))?,
            );
        }
    }
    if out.contains(&0) {
        return Err("sizes must be at least 1".into());
    }
    out.sort_unstable();
    out.dedup();
    Ok(out)
}

/// Either `a..b` (expanded with `--steps` points, both ends included) or an
/// explicit comma list.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(untagged)]
pub enum FloatGrid {
    Range { from: f64, to: f64 },
    List(Vec<f64>),
}

impl FloatGrid {
    pub fn expand(&self, steps: usize) -> Vec<f64> {
        match self {
            FloatGrid::List(v) => v.clone(),
            FloatGrid::Range { from, to } if steps <= 1 || from == to => vec![*from],
            FloatGrid::Range { from, to } => (0..steps)
                .map(|i| from + (to - from) * i as f64 / (steps - 1) as f64)
                .collect(),
        }
    }

    pub fn values(&self) -> Vec<f64> {
        match self {
            FloatGrid::List(v) => v.clone(),
            FloatGrid::Range { from, to } => vec![*from, *to],
        }
    }
}

pub fn parse_floats(text: &str) -> Result<FloatGrid, String> {
    let number = |s: &str| -> Result<f64, String> {
        let x: f64 = s
            .trim()
            .parse()
            .map_err(|_| format!("`{s}` is not a number"))?;
        if x.is_finite() {
            Ok(x)
        } else {
            Err(format!("`{s}` is not finite"))
        }
    };
    if let Some((a, b)) = text.split_once("..") {
        let (from, to) = (number(a)?, number(b.trim_start_matches('='))?);
        if from > to {
            return Err(format!("empty range `{text}`"));
        }
        return Ok(FloatGrid::Range { from, to });
    }
    let list = text.split(',').map(number).collect::<Result<Vec<_>, _>>()?;
    Ok(FloatGrid::List(list))
}

/// A float grid whose values are visibilities in `(0, 1]`.
pub fn parse_visibilities(text: &str) -> Result<FloatGrid, String> {
    let grid = parse_floats(text)?;
    if let Some(v) = grid.values().into_iter().find(|v| !(*v > 0.0 && *v <= 1.0)) {
        return Err(format!("visibility {v} outside (0, 1]"));
    }
    Ok(grid)
}

pub fn parse_visibility(text: &str) -> Result<f64, String> {
    match parse_visibilities(text)? {
        FloatGrid::List(v) if v.len() == 1 => Ok(v[0]),
        _ => Err("expected a single visibility".into()),
    }
}

pub fn parse_unit(text: &str) -> Result<f64, String> {
    let x: f64 = text
        .trim()
        .parse()
        .map_err(|_| format!("`{text}` is not a number"))?;
    if (0.0..=1.0).contains(&x) {
        Ok(x)
    } else {
        Err(format!("{x} outside [0, 1]"))
    }
}

/// Four comma-separated correlators `e11,e12,e21,e22`.
pub fn parse_correlators(text: &str) -> Result<[f64; 4], String> {
    match parse_floats(text)? {
        FloatGrid::List(v) if v.len() == 4 => Ok([v[0], v[1], v[2], v[3]]),
        _ => Err("expected four correlators e11,e12,e21,e22".into()),
    }
}
