//! Round-trip checks driven by the fuzz targets and by the corpus replay
//! test. Each one accepts arbitrary bytes and panics only when a parser
//! accepts something it cannot reproduce, and return whether the input was
//! accepted.

use num_bigint::BigUint;

use crate::dyadic::{self, RingSet};
use crate::ec;
use crate::l1::L1NamePrefix;
use crate::measures::{self, MeasureSpec, NameTriple};
use crate::rational;
use crate::stepfn::{self, StepFunction};

fn text(data: &[u8]) -> Option<&str> {
    std::str::from_utf8(data).ok()
}

pub fn rational_parse(data: &[u8]) -> bool {
    let Some(s) = text(data) else { return false };
    let Ok(r) = rational::parse(s) else { return false };
    let shown = rational::format(&r);
    assert_eq!(rational::parse(&shown).expect("formatted rational must parse"), r);
    true
}

pub fn ringset_json(data: &[u8]) -> bool {
    let Ok(e) = serde_json::from_slice::<RingSet>(data) else { return false };
    assert!(RingSet::is_canonical(e.pieces()));
    let back: RingSet = serde_json::from_str(&serde_json::to_string(&e).unwrap()).unwrap();
    assert_eq!(back, e);
    assert_eq!(e.union(&e.complement()), RingSet::whole());
    true
}

pub fn stepfn_json(data: &[u8]) -> bool {
    let Ok(s) = serde_json::from_slice::<StepFunction>(data) else { return false };
    let back: StepFunction = serde_json::from_str(&serde_json::to_string(&s).unwrap()).unwrap();
    assert_eq!(back, s);
    assert!(s.pieces().iter().all(|p| !p.support.is_empty()));
    true
}

pub fn measure_spec(data: &[u8]) -> bool {
    let Some(s) = text(data) else { return false };
    let Ok(spec) = MeasureSpec::parse(s) else { return false };
    let back = MeasureSpec::parse(&serde_json::to_string(&spec).unwrap()).unwrap();
    assert_eq!(back, spec);
    true
}

pub fn name_stream(data: &[u8]) -> bool {
    let Some(s) = text(data) else { return false };
    let Ok(triples) = measures::parse_triples(s) else { return false };
    for t in triples {
        assert!(t.low < t.high);
        assert_eq!(NameTriple::parse(&t.to_string()).unwrap(), t);
    }
    true
}

pub fn en_text(data: &[u8]) -> bool {
    let Some(s) = text(data) else { return false };
    let Ok(entries) = ec::parse_en(s, None) else { return false };
    assert_eq!(ec::parse_word(&ec::render_word(&entries)).unwrap(), entries);
    assert_eq!(ec::parse_numeric(&ec::render_numeric(&entries)).unwrap(), entries);
    true
}

pub fn l1_prefix_json(data: &[u8]) -> bool {
    let Ok(prefix) = serde_json::from_slice::<L1NamePrefix>(data) else { return false };
    let back: L1NamePrefix = serde_json::from_str(&serde_json::to_string(&prefix).unwrap()).unwrap();
    assert_eq!(back, prefix);
    if let Ok(name) = prefix.clone().into_name() {
        for (i, s) in prefix.approximants.iter().enumerate() {
            assert_eq!(&name.approximant(i).unwrap(), s);
        }
        assert!(name.approximant(prefix.approximants.len()).is_err());
    }
    true
}

pub fn rsf_decode(data: &[u8]) -> bool {
    if data.len() > 48 {
        return false;
    }
    let code = BigUint::from_bytes_le(data);
    let Ok(s) = stepfn::rsf_decode(&code) else { return false };
    assert_eq!(stepfn::rsf_code(&s).unwrap(), code);
    true
}

pub fn alpha(data: &[u8]) -> bool {
    if data.len() > 24 {
        return false;
    }
    let code = BigUint::from_bytes_le(data);
    let Ok(e) = dyadic::alpha(&code) else { return false };
    let least = dyadic::alpha_inverse(&e).unwrap();
    assert!(least <= code);
    assert_eq!(dyadic::alpha(&least).unwrap(), e);
    true
}

/// Target name and check, in the order the fuzz crate declares them.
pub const TARGETS: &[(&str, fn(&[u8]) -> bool)] = &[
    ("rational_parse", rational_parse),
    ("ringset_json", ringset_json),
    ("stepfn_json", stepfn_json),
    ("measure_spec", measure_spec),
    ("name_stream", name_stream),
    ("en_text", en_text),
    ("l1_prefix_json", l1_prefix_json),
    ("rsf_decode", rsf_decode),
    ("alpha", alpha),
];
