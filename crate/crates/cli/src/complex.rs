use pmc_core::C64;

/// Parse `RE+IMi`, `RE-IMi`, `RE` or `IMi` (no spaces; exponents allowed).
pub fn parse_complex(s: &str) -> Result<C64, String> {
    let bad = || format!("`{s}` is not a complex number of the form RE+IMi");
    if s.is_empty() || s.contains(char::is_whitespace) {
        return Err(bad());
    }
    let Some(body) = s.strip_suffix('i') else {
        return s.parse::<f64>().map(|re| C64::new(re, 0.0)).map_err(|_| bad());
    };
    let bytes = body.as_bytes();
    // the sign that starts the imaginary part: not leading, not an exponent sign
    let split = (1..bytes.len())
        .rev()
        .find(|&k| matches!(bytes[k], b'+' | b'-') && !matches!(bytes[k - 1], b'e' | b'E'));
    let (re, im) = match split {
        Some(k) => (&body[..k], &body[k..]),
        None => ("0", body),
    };
    let im = match im {
        "" | "+" => "1",
        "-" => "-1",
        t => t,
    };
    let re: f64 = re.parse().map_err(|_| bad())?;
    let im: f64 = im.parse().map_err(|_| bad())?;
    Ok(C64::new(re, im))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn forms() {
        assert_eq!(parse_complex("0.3+0.4i").unwrap(), C64::new(0.3, 0.4));
        assert_eq!(parse_complex("1-0.5i").unwrap(), C64::new(1.0, -0.5));
        assert_eq!(parse_complex("-1+0.5i").unwrap(), C64::new(-1.0, 0.5));
        assert_eq!(parse_complex("2").unwrap(), C64::new(2.0, 0.0));
        assert_eq!(parse_complex("-2.5i").unwrap(), C64::new(0.0, -2.5));
        assert_eq!(parse_complex("1e-3-2E+1i").unwrap(), C64::new(1e-3, -20.0));
        assert_eq!(parse_complex("1+i").unwrap(), C64::new(1.0, 1.0));
    }

    #[test]
    fn rejects() {
        for s in ["", "1 + 2i", "1+2j", "abc", "1+2ii", "++1i"] {
            assert!(parse_complex(s).is_err(), "{s}");
        }
    }
}
