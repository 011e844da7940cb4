use std::str::FromStr;

/// A list of numbers given as `1,2,5`, `log:LO:HI:N` or `lin:LO:HI:N`.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid(pub Vec<f64>);

impl FromStr for Grid {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let s = s.trim();
        if let Some((kind, rest)) = s.split_once(':') {
            let parts: Vec<&str> = rest.split(':').collect();
            let [lo, hi, n] = parts[..] else {
                return Err(format!("expected {kind}:LO:HI:N, got {s:?}"));
            };
            let lo: f64 = lo.parse().map_err(|_| format!("bad LO in {s:?}"))?;
            let hi: f64 = hi.parse().map_err(|_| format!("bad HI in {s:?}"))?;
            let n: usize = n.parse().map_err(|_| format!("bad N in {s:?}"))?;
            if n < 2 || !(hi > lo) {
                return Err(format!("{s:?} needs N >= 2 and HI > LO"));
            }
            let at = |i: usize| i as f64 / (n - 1) as f64;
            let values = match kind {
                "log" if lo > 0.0 => (0..n).map(|i| if i + 1 == n { hi } else { lo * (hi / lo).powf(at(i)) }).collect(),
                "log" => return Err(format!("log grid needs LO > 0, got {lo}")),
                "lin" => (0..n).map(|i| if i + 1 == n { hi } else { lo + (hi - lo) * at(i) }).collect(),
                _ => return Err(format!("unknown grid kind {kind:?}; use log or lin")),
            };
            return Ok(Grid(values));
        }
        let values = s
            .split(',')
            .map(|v| v.trim().parse::<f64>().map_err(|_| format!("bad number {v:?} in grid")))
            .collect::<Result<Vec<_>, _>>()?;
        if values.iter().any(|v| !v.is_finite()) {
            return Err("grid values must be finite".into());
        }
        Ok(Grid(values))
    }
}
