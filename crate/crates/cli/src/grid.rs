//! Inclusive decimal grids `a:b:step`, stepped in exact integer units.

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Decimal {
    units: i128,
    places: u32,
}

fn parse_decimal(s: &str) -> Result<Decimal, String> {
    let t = s.trim();
    let (neg, body) = match t.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, t.strip_prefix('+').unwrap_or(t)),
    };
    let (int, frac) = body.split_once('.').unwrap_or((body, ""));
    if int.is_empty() && frac.is_empty()
        || !int.bytes().all(|b| b.is_ascii_digit())
        || !frac.bytes().all(|b| b.is_ascii_digit())
        || frac.len() > 18
    {
        return Err(format!("not a plain decimal number: {s:?}"));
    }
    let digits = format!("{int}{frac}");
    let units: i128 = digits.trim_start_matches('0').parse().unwrap_or(0);
    Ok(Decimal {
        units: if neg { -units } else { units },
        places: frac.len() as u32,
    })
}

fn rescale(x: Decimal, places: u32) -> i128 {
    x.units * 10i128.pow(places - x.places)
}

/// Expands `a:b:step` into `a, a+step, …, b` (inclusive). `b − a` must be a
/// multiple of `step`. Each point is the double nearest its decimal value.
pub fn parse_grid(spec: &str) -> Result<Vec<f64>, String> {
    let parts: Vec<&str> = spec.split(':').collect();
    let [a, b, step] = parts.as_slice() else {
        return Err(format!("grid must look like start:stop:step, got {spec:?}"));
    };
    let (a, b, step) = (parse_decimal(a)?, parse_decimal(b)?, parse_decimal(step)?);
    let places = a.places.max(b.places).max(step.places);
    let (lo, hi, st) = (rescale(a, places), rescale(b, places), rescale(step, places));
    if st <= 0 {
        return Err("grid step must be positive".into());
    }
    if hi < lo {
        return Err("grid stop must not be below start".into());
    }
    if (hi - lo) % st != 0 {
        return Err(format!("grid stop is not start plus a whole number of steps: {spec:?}"));
    }
    let count = (hi - lo) / st + 1;
    if count > 1_000_000 {
        return Err(format!("grid has {count} points (limit 1000000)"));
    }
    let scale = 10f64.powi(places as i32);
    Ok((0..count).map(|i| (lo + i * st) as f64 / scale).collect())
}
