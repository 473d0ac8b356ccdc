use super::{Dem, DemError, DemProvenance};

/// Line-oriented text form: provenance header comments followed by
/// `error(p) D<i> ... L<k> ...` records.
pub fn export_dem(dem: &Dem) -> String {
    let mut out = String::new();
    let pv = &dem.provenance;
    out.push_str(&format!(
        "# code={} rounds={} p={} schedule={} checks_per_round={}\n",
        pv.code, pv.rounds, pv.p, pv.schedule_hash, pv.checks_per_round
    ));
    out.push_str(&format!(
        "# detectors={} observables={}\n",
        dem.num_detectors, dem.num_observables
    ));
    let record = |out: &mut String, p: f64, dets: &[u32], obs: u64| {
        out.push_str(&format!("error({p})"));
        for d in dets {
            out.push_str(&format!(" D{d}"));
        }
        for i in 0..64 {
            if (obs >> i) & 1 == 1 {
                out.push_str(&format!(" L{i}"));
            }
        }
        out.push('\n');
    };
    for f in &dem.faults {
        record(&mut out, f.probability, &f.detectors, f.observables);
    }
    for &(p, obs) in &dem.undetectable {
        record(&mut out, p, &[], obs);
    }
    out
}

/// Parses the text form. Also accepts flattened DEMs from other tools:
/// `detector`/`logical_observable` declarations extend the index ranges and
/// other instructions are rejected.
pub fn import_dem(text: &str) -> Result<Dem, DemError> {
    let mut header_dets: Option<usize> = None;
    let mut header_obs: Option<usize> = None;
    let mut provenance = DemProvenance::default();
    let mut max_det: Option<u32> = None;
    let mut max_obs: Option<u32> = None;
    let mut mechs = Vec::new();

    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let err = |msg: String| DemError::Parse { line: line_no, msg };
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(comment) = line.strip_prefix('#') {
            for kv in comment.split_whitespace() {
                let Some((k, v)) = kv.split_once('=') else { continue };
                let num = |v: &str| v.parse::<usize>().map_err(|_| err(format!("bad {k}")));
                match k {
                    "code" => provenance.code = v.to_string(),
                    "rounds" => provenance.rounds = num(v)?,
                    "p" => provenance.p = v.parse().map_err(|_| err("bad p".into()))?,
                    "schedule" => provenance.schedule_hash = v.to_string(),
                    "checks_per_round" => provenance.checks_per_round = num(v)?,
                    "detectors" => header_dets = Some(num(v)?),
                    "observables" => header_obs = Some(num(v)?),
                    _ => {}
                }
            }
            continue;
        }
        let split = match (line.find('('), line.find(char::is_whitespace)) {
            (Some(open), Some(ws)) if open < ws => line.find(')').map(|c| c + 1),
            (_, ws) => ws,
        };
        let (head, rest) = match split {
            Some(i) => (&line[..i], line[i..].trim()),
            None => (line, ""),
        };
        let targets = |rest: &str| -> Result<(Vec<u32>, Vec<u32>), DemError> {
            let mut dets = Vec::new();
            let mut obs = Vec::new();
            for tok in rest.split_whitespace() {
                if let Some(d) = tok.strip_prefix('D') {
                    dets.push(d.parse().map_err(|_| err(format!("bad target '{tok}'")))?);
                } else if let Some(o) = tok.strip_prefix('L') {
                    obs.push(o.parse().map_err(|_| err(format!("bad target '{tok}'")))?);
                } else {
                    return Err(err(format!("unexpected target '{tok}'")));
                }
            }
            Ok((dets, obs))
        };
        if let Some(arg) = head.strip_prefix("error(").and_then(|s| s.strip_suffix(')')) {
            let p: f64 = arg.parse().map_err(|_| err(format!("bad probability '{arg}'")))?;
            let (mut dets, obs) = targets(rest)?;
            dets.sort_unstable();
            let before = dets.len();
            dets.dedup();
            if dets.len() != before {
                return Err(err("repeated detector".into()));
            }
            let mut mask = 0u64;
            for o in obs {
                if o >= 64 {
                    return Err(err(format!("observable L{o} exceeds the 64-bit mask")));
                }
                mask ^= 1 << o;
                max_obs = max_obs.max(Some(o));
            }
            if let Some(&d) = dets.last() {
                max_det = max_det.max(Some(d));
            }
            mechs.push((p, dets, mask));
        } else if head.starts_with("detector") || head.starts_with("logical_observable") {
            let (dets, obs) = targets(rest)?;
            max_det = max_det.max(dets.into_iter().max());
            max_obs = max_obs.max(obs.into_iter().max());
        } else {
            return Err(err(format!("unsupported instruction '{head}'")));
        }
    }

    let num_detectors = header_dets.unwrap_or(max_det.map_or(0, |d| d as usize + 1));
    let num_observables = header_obs.unwrap_or(max_obs.map_or(0, |o| o as usize + 1));
    if max_det.is_some_and(|d| d as usize >= num_detectors) {
        return Err(DemError::Parse { line: 0, msg: "detector index exceeds header count".into() });
    }
    let mut dem = Dem::from_mechanisms(num_detectors, num_observables, mechs)
        .map_err(|e| DemError::Parse { line: 0, msg: e.to_string() })?;
    dem.provenance = provenance;
    Ok(dem)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_single_record() {
        let dem = import_dem("error(0.001) D0 D72 L3\n").unwrap();
        assert_eq!(dem.len(), 1);
        let f = &dem.faults[0];
        assert_eq!(f.probability, 0.001);
        assert_eq!(f.detectors, vec![0, 72]);
        assert_eq!(f.observables, 1 << 3);
        assert_eq!(dem.num_detectors, 73);
        assert_eq!(dem.num_observables, 4);
    }

    #[test]
    fn parse_errors_carry_line_numbers() {
        let e = import_dem("error(0.1) D0\nerror(x) D1\n").unwrap_err();
        assert_eq!(e, DemError::Parse { line: 2, msg: "bad probability 'x'".into() });
        let e = import_dem("error(0.1) D0\n\nrepeat 3 {\n").unwrap_err();
        assert!(matches!(e, DemError::Parse { line: 3, .. }));
        assert!(import_dem("error(0.1) D0 Q1").is_err());
    }

    #[test]
    fn accepts_declarations() {
        let dem = import_dem("detector(1, 2) D7\nlogical_observable L1\nerror(0.01) D1 D2\n").unwrap();
        assert_eq!((dem.num_detectors, dem.num_observables), (8, 2));
    }
}
