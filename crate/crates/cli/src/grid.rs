//! Grid specifications: `a,b,c` lists or inclusive `start:stop:step` ranges.

/// Decimal places written in a numeric literal (`"0.125"` → 3, `"1e-3"` → 0).
fn decimals(token: &str) -> i32 {
    match token.split_once('.') {
        Some((_, frac)) if !token.contains(['e', 'E']) => frac.len() as i32,
        _ => 0,
    }
}

fn number(token: &str) -> Result<f64, String> {
    let t = token.trim();
    let v: f64 = t.parse().map_err(|_| format!("not a number: {t:?}"))?;
    if !v.is_finite() {
        return Err(format!("not a finite number: {t:?}"));
    }
    Ok(v)
}

/// Parses a grid of reals. Range values are rounded to the decimal places of
/// the literals, so `0.01:0.1:0.01` yields exactly `0.01, 0.02, …, 0.1`.
pub fn parse_real_grid(spec: &str) -> Result<Vec<f64>, String> {
    let spec = spec.trim();
    if spec.is_empty() {
        return Err("empty grid".into());
    }
    if spec.contains(':') {
        let parts: Vec<&str> = spec.split(':').map(str::trim).collect();
        let [start, stop, step] = parts[..] else {
            return Err(format!("range must be start:stop:step, got {spec:?}"));
        };
        let (a, b, h) = (number(start)?, number(stop)?, number(step)?);
        if !(h > 0.0) {
            return Err(format!("range step must be positive, got {h}"));
        }
        if b < a {
            return Err(format!("empty range {spec:?}"));
        }
        let scale = 10f64.powi(decimals(start).max(decimals(step)).max(decimals(stop)));
        let count = ((b - a) / h + 1e-9).floor() as u64 + 1;
        if count > 10_000_000 {
            return Err(format!("range {spec:?} has too many points"));
        }
        Ok((0..count).map(|i| ((a + i as f64 * h) * scale).round() / scale).collect())
    } else {
        spec.split(',').map(number).collect()
    }
}

/// Parses a grid of integers (same syntax, every value must be a whole number).
pub fn parse_integer_grid(spec: &str) -> Result<Vec<u64>, String> {
    parse_real_grid(spec)?
        .into_iter()
        .map(|v| {
            if v >= 0.0 && v.fract() == 0.0 && v < 2f64.powi(53) {
                Ok(v as u64)
            } else {
                Err(format!("expected a nonnegative integer, got {v}"))
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lists_and_ranges() {
        assert_eq!(parse_real_grid("0.1, 0.25,3").unwrap(), vec![0.1, 0.25, 3.0]);
        let g = parse_real_grid("0.01:1:0.01").unwrap();
        assert_eq!(g.len(), 100);
        assert_eq!(g[6], 0.07);
        assert_eq!(*g.last().unwrap(), 1.0);
        assert_eq!(parse_integer_grid("5,10,30,100").unwrap(), vec![5, 10, 30, 100]);
        assert_eq!(parse_integer_grid("3:9:3").unwrap(), vec![3, 6, 9]);
    }

    #[test]
    fn rejects_bad_specs() {
        for spec in ["", "1:2", "a,b", "1:0:0.1", "0:1:0", "1,inf", "1:2:3:4"] {
            assert!(parse_real_grid(spec).is_err(), "{spec}");
        }
        assert!(parse_integer_grid("2.5").is_err());
        assert!(parse_integer_grid("-3").is_err());
    }
}
