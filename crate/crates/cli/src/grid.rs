use crate::UsageError;

const MAX_POINTS: usize = 10_000_000;

/// Parse `start:stop:step` (inclusive, evenly spaced) or `a,b,c`. The result
/// is non-empty and strictly increasing.
pub fn parse_grid(text: &str) -> Result<Vec<f64>, UsageError> {
    let text = text.trim();
    let points = if text.contains(':') {
        let parts: Vec<&str> = text.split(':').collect();
        if parts.len() != 3 {
            return Err(usage(format!("grid `{text}`: expected start:stop:step")));
        }
        let [start, stop, step] = [num(parts[0])?, num(parts[1])?, num(parts[2])?];
        if !(step > 0.0) || !step.is_finite() || stop < start {
            return Err(usage(format!("grid `{text}`: need step > 0 and stop >= start")));
        }
        let span = (stop - start) / step;
        // tolerate rounding in the step count, e.g. 0:1:0.1
        let k = (span + 1e-9).floor();
        if k + 1.0 > MAX_POINTS as f64 {
            return Err(usage(format!("grid `{text}` has more than {MAX_POINTS} points")));
        }
        let k = k as usize;
        let end = start + k as f64 * step;
        let pts: Vec<f64> = if k == 0 {
            vec![start]
        } else {
            (0..=k).map(|i| start + (end - start) * i as f64 / k as f64).collect()
        };
        match decimals(&parts) {
            // snap to the precision the user wrote, so 0.1:0.9:0.2 gives 0.3
            Some(d) => pts.into_iter().map(|v| format!("{v:.d$}").parse().expect("formatted float")).collect(),
            None => pts,
        }
    } else {
        text.split(',').map(num).collect::<Result<Vec<_>, _>>()?
    };
    if points.is_empty() {
        return Err(usage("empty grid"));
    }
    if points.windows(2).any(|w| w[1] <= w[0]) {
        return Err(usage(format!("grid `{text}` must be strictly increasing")));
    }
    Ok(points)
}

/// Integer grid: same syntax, every point a non-negative integer.
pub fn parse_int_grid(text: &str) -> Result<Vec<u32>, UsageError> {
    parse_grid(text)?
        .into_iter()
        .map(|v| {
            if v >= 0.0 && v.fract() == 0.0 && v <= u32::MAX as f64 {
                Ok(v as u32)
            } else {
                Err(usage(format!("`{v}` is not a non-negative integer")))
            }
        })
        .collect()
}

/// Plain numeric list separated by commas and/or whitespace.
pub fn parse_list(text: &str) -> Result<Vec<f64>, UsageError> {
    let v: Vec<f64> = text
        .split(|c: char| c == ',' || c.is_whitespace())
        .filter(|s| !s.is_empty())
        .map(num)
        .collect::<Result<_, _>>()?;
    if v.is_empty() {
        return Err(usage("empty numeric list"));
    }
    Ok(v)
}

/// Largest number of fractional digits among plain decimal inputs; `None`
/// when any uses an exponent.
fn decimals(parts: &[&str]) -> Option<usize> {
    parts
        .iter()
        .map(|p| {
            let p = p.trim();
            if p.contains(['e', 'E']) {
                None
            } else {
                Some(p.split_once('.').map_or(0, |(_, f)| f.len()))
            }
        })
        .try_fold(0, |acc, d| d.map(|d| acc.max(d)))
}

fn num(s: &str) -> Result<f64, UsageError> {
    let s = s.trim();
    s.parse::<f64>().map_err(|_| usage(format!("`{s}` is not a number")))
}

fn usage(msg: impl Into<String>) -> UsageError {
    UsageError(msg.into())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ranges_hit_the_endpoint_exactly() {
        let g = parse_grid("0:1:0.1").unwrap();
        assert_eq!(g.len(), 11);
        assert_eq!(g[3], 0.3);
        assert_eq!(*g.last().unwrap(), 1.0);
        assert_eq!(parse_grid("0.5:0.5:1").unwrap(), vec![0.5]);
        assert_eq!(parse_grid("0:1:0.3").unwrap().len(), 4);
        assert_eq!(parse_grid("0.1:0.9:0.2").unwrap(), vec![0.1, 0.3, 0.5, 0.7, 0.9]);
        assert_eq!(parse_grid("0:3e-1:1e-1").unwrap().len(), 4);
    }

    #[test]
    fn lists_and_rejections() {
        assert_eq!(parse_grid("0.1, 0.5,2").unwrap(), vec![0.1, 0.5, 2.0]);
        for bad in ["", "1,0.5", "0:1", "0:1:0", "1:0:0.1", "a,b", "0,0"] {
            assert!(parse_grid(bad).is_err(), "{bad}");
        }
        assert_eq!(parse_int_grid("1:4:1").unwrap(), vec![1, 2, 3, 4]);
        assert!(parse_int_grid("0.5,1").is_err());
        assert_eq!(parse_list("1 2,\n3").unwrap(), vec![1.0, 2.0, 3.0]);
    }
}
