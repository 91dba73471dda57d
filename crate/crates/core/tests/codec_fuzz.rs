use topgrid::io::{decode, parse_calibration, serialize_calibration, PnmError};
use topgrid::pipeline::Calibration;

/// Valid files; the second element marks the header length.
fn corpus() -> Vec<(Vec<u8>, usize)> {
    let mut out = Vec::new();
    let mut add = |header: &str, payload: usize| {
        let mut bytes = header.as_bytes().to_vec();
        bytes.extend((0..payload).map(|i| (i * 37 % 251) as u8));
        out.push((bytes, header.len()));
    };
    add("P5\n4 2\n255\n", 8);
    add("P6\n3 2\n255\n", 18);
    add("P5\n2 2\n65535\n", 8);
    add("P5 4 2 255\n", 8);
    add("P6\n# made by hand\n2 1\n255\n", 6);
    out
}

const REPLACEMENTS: &[u8] = b"0123456789 \n#Px-+.\x00\xff";

fn comment_span(header: &[u8]) -> Option<std::ops::Range<usize>> {
    let start = header.iter().position(|&b| b == b'#')?;
    let end = start + header[start..].iter().position(|&b| b == b'\n')?;
    Some(start..end)
}

#[test]
fn corpus_decodes() {
    for (bytes, _) in corpus() {
        decode(&bytes).unwrap();
    }
}

#[test]
fn every_single_byte_header_mutation_is_rejected() {
    let mut tried = 0;
    let mut accepted = Vec::new();
    for (bytes, header_len) in corpus() {
        let comment = comment_span(&bytes[..header_len]);
        for pos in 0..header_len {
            if comment.as_ref().is_some_and(|c| c.contains(&pos)) {
                continue;
            }
            for &r in REPLACEMENTS {
                let orig = bytes[pos];
                // whitespace runs are interchangeable, and a '#' just before a
                // comment only starts it one byte earlier
                let extends_comment = r == b'#' && comment.as_ref().is_some_and(|c| c.start == pos + 1);
                if r == orig || (orig.is_ascii_whitespace() && r.is_ascii_whitespace()) || extends_comment {
                    continue;
                }
                let mut m = bytes.clone();
                m[pos] = r;
                tried += 1;
                if decode(&m).is_ok() {
                    accepted.push((String::from_utf8_lossy(&m[..header_len]).into_owned(), pos, r));
                }
            }
        }
    }
    assert!(tried >= 100, "only {tried} mutations");
    assert!(
        accepted.is_empty(),
        "{} of {tried} mutations accepted: {accepted:?}",
        accepted.len()
    );
}

#[test]
fn errors_carry_offsets() {
    let offset = |e: PnmError| match e {
        PnmError::BadMagic { offset, .. }
        | PnmError::MalformedHeader { offset, .. }
        | PnmError::UnsupportedMaxval { offset, .. }
        | PnmError::Truncated { offset, .. }
        | PnmError::TrailingData { offset, .. } => offset,
    };
    assert_eq!(offset(decode(b"P7\n1 1\n255\n\0").unwrap_err()), 0);
    let mut short = b"P5\n4 2\n255\n".to_vec();
    short.extend([0u8; 7]);
    assert!(matches!(
        decode(&short),
        Err(PnmError::Truncated {
            expected: 8,
            found: 7,
            ..
        })
    ));
    assert!(offset(decode(b"P5\n4 2\n254\n01234567").unwrap_err()) >= 7);
}

#[test]
fn calibration_token_mutations_are_rejected() {
    let text = serialize_calibration(&Calibration::Homography(
        topgrid::geometry::Homography::from_row_major([2.0, 0.1, 3.0, 0.0, 1.5, -4.0, 0.0, 0.001, 1.0]).unwrap(),
    ));
    parse_calibration(&text).unwrap();
    let numbers: Vec<usize> = text
        .char_indices()
        .filter(|(_, c)| c.is_ascii_digit())
        .map(|(i, _)| i)
        .collect();
    let mut tried = 0;
    for &i in &numbers {
        for r in ["x", ",", "_"] {
            let mut m = text.clone();
            m.replace_range(i..i + 1, r);
            tried += 1;
            assert!(parse_calibration(&m).is_err(), "{m:?}");
        }
    }
    assert!(tried >= 30);
    assert!(parse_calibration(&text.replace("HOMOGRAPHY", "HOMOGRAFY")).is_err());
}
