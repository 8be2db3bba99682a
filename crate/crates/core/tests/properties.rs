// SPDX-License-Identifier: Apache-2.0

mod common;

use std::collections::HashMap;

use num_bigint::{BigInt, BigUint};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use tyvcd::bits::BitString;
use tyvcd::fixtures::{enum_cpu_fixture, flatten_design, listing1_fixture, Strategy};
use tyvcd::hgldd::{enum_lookup, parse_hgldd, EnumDef, Encoding};
use tyvcd::link::ResolvedExpr;
use tyvcd::translator::{eval_expr, render_ground, TypedValue};
use tyvcd::vcd::{parse_vcd_str, ScopeKind, Timescale, VarKind, VcdBuilder};

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn value_queries_match_linear_scan(seed in any::<u64>(), max in 0usize..400) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let tr = common::random_trace(&mut rng, max);
        let doc = parse_vcd_str(&tr.text).unwrap();
        for (i, (id, _)) in tr.vars.iter().enumerate() {
            for t in (0..=tr.last_time + 3).step_by(7) {
                prop_assert_eq!(doc.value_at(id, t).unwrap().to_string(), tr.oracle_value_at(i, t));
            }
            let got: Vec<(u64, String)> = doc
                .changes_in(id, 0, tr.last_time)
                .unwrap()
                .into_iter()
                .map(|(t, b)| (t, b.to_string()))
                .collect();
            prop_assert_eq!(got, tr.oracle_changes_in(i, 0, tr.last_time));
        }
    }

    #[test]
    fn change_windows_match_linear_scan(seed in any::<u64>(), a in 0u64..2000, len in 0u64..2000) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let tr = common::random_trace(&mut rng, 200);
        let doc = parse_vcd_str(&tr.text).unwrap();
        for (i, (id, _)) in tr.vars.iter().enumerate() {
            let got: Vec<(u64, String)> = doc
                .changes_in(id, a, a + len)
                .unwrap()
                .into_iter()
                .map(|(t, b)| (t, b.to_string()))
                .collect();
            prop_assert_eq!(got, tr.oracle_changes_in(i, a, a + len));
        }
    }

    #[test]
    fn vcd_write_then_parse_is_identity(seed in any::<u64>(), max in 0usize..300) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let tr = common::random_trace(&mut rng, max);
        let doc = parse_vcd_str(&tr.text).unwrap();
        let text = doc.to_vcd_string();
        let again = parse_vcd_str(&text).unwrap();
        prop_assert_eq!(&again, &doc);
        prop_assert_eq!(again.to_vcd_string(), text);
    }

    #[test]
    fn enum_lookup_matches_linear_scan(width in 1u32..=8, keys in proptest::collection::btree_set(0u64..256, 0..40)) {
        let keys: Vec<u64> = keys.into_iter().filter(|k| *k < (1 << width)).collect();
        let variants: Vec<(u64, String)> = keys.iter().map(|k| (*k, format!("V{k}"))).collect();
        let def = EnumDef::new("E", variants.clone());
        for k in 0..(1u64 << width) {
            let scan = variants.iter().find(|(v, _)| *v == k).map(|(_, n)| n.as_str());
            prop_assert_eq!(enum_lookup(&def, k), scan);
            let bits = BitString::from_biguint(&BigUint::from(k), width).unwrap();
            let rendered = render_ground(&bits, Encoding::Enum, Some(&def)).unwrap();
            match scan {
                Some(n) => prop_assert_eq!(rendered, TypedValue::Enum { name: n.to_string(), raw: BigUint::from(k) }),
                None => prop_assert_eq!(rendered, TypedValue::EnumUnknown(BigUint::from(k))),
            }
        }
    }

    #[test]
    fn expressions_match_string_oracle(
        a in "[01xz]{1,12}",
        b in "[01xz]{1,12}",
        ops in proptest::collection::vec((0u8..3, any::<u16>(), any::<u16>()), 1..8),
    ) {
        let mut vcd = VcdBuilder::new(Timescale::default());
        vcd.open_scope(ScopeKind::Module, "t");
        let ia = vcd.var(VarKind::Wire, a.len() as u32, "a");
        let ib = vcd.var(VarKind::Wire, b.len() as u32, "b");
        vcd.close_scope();
        vcd.change(0, &ia, a.parse().unwrap());
        vcd.change(0, &ib, b.parse().unwrap());
        let doc = vcd.finish(0).unwrap();

        let leaf = |id: &str, s: &str| (ResolvedExpr::Sig { id_code: id.to_string(), width: s.len() as u32 }, s.to_uppercase());
        let mut pool = vec![leaf(&ia, &a), leaf(&ib, &b)];
        for (op, x, y) in ops {
            let (e, s) = pool[x as usize % pool.len()].clone();
            let next = match op {
                0 => {
                    // slice [hi:lo] of an MSB-first string
                    let w = s.len() as u32;
                    let lo = y as u32 % w;
                    let hi = lo + (x as u32 % (w - lo));
                    let sub = s[(w - 1 - hi) as usize..=(w - 1 - lo) as usize].to_string();
                    (ResolvedExpr::Slice { of: Box::new(e), hi, lo }, sub)
                }
                1 => {
                    let (e2, s2) = pool[y as usize % pool.len()].clone();
                    (ResolvedExpr::Concat(vec![e, e2]), format!("{s}{s2}"))
                }
                _ => {
                    let c: String = format!("{y:b}");
                    (ResolvedExpr::Concat(vec![ResolvedExpr::Const(c.parse().unwrap()), e]), format!("{c}{s}"))
                }
            };
            pool.push(next);
        }
        for (e, s) in &pool {
            let got = eval_expr(e, &doc, 0).unwrap();
            prop_assert_eq!(got.width(), e.width());
            prop_assert_eq!(got.to_string(), s.clone());
        }
    }

    #[test]
    fn left_extension_pads_like_the_leading_symbol(bits in "[01xz]{1,8}", extra in 0u32..8) {
        let b: BitString = bits.parse().unwrap();
        let w = b.width() + extra;
        let ext = b.extend_to(w).unwrap();
        let pad = match bits.chars().next().unwrap() {
            'x' => 'X',
            'z' => 'Z',
            _ => '0',
        };
        let expect = format!("{}{}", pad.to_string().repeat(extra as usize), bits.to_uppercase());
        prop_assert_eq!(ext.to_string(), expect);
    }
}

/// Independent two's complement encoder: `v mod 2^w` as a binary string.
fn twos_complement(v: i64, w: u32) -> String {
    let m = 1i64 << w;
    let u = ((v % m) + m) % m;
    format!("{u:0width$b}", width = w as usize)
}

#[test]
fn signed_and_unsigned_round_trip_exhaustively_up_to_16_bits() {
    for w in 1..=16u32 {
        let half = 1i64 << (w - 1);
        for v in -half..half {
            let bits: BitString = twos_complement(v, w).parse().unwrap();
            assert_eq!(render_ground(&bits, Encoding::Signed, None).unwrap(), TypedValue::Signed(BigInt::from(v)), "w={w} v={v}");
        }
        for v in 0..(1i64 << w) {
            let bits: BitString = twos_complement(v, w).parse().unwrap();
            assert_eq!(render_ground(&bits, Encoding::Unsigned, None).unwrap(), TypedValue::Unsigned(BigUint::from(v as u64)));
        }
    }
}

#[test]
fn debug_documents_round_trip_through_json() {
    for design in [listing1_fixture(), enum_cpu_fixture()] {
        for s in Strategy::ALL {
            let f = flatten_design(&design, s).unwrap();
            let text = f.debug.to_json_string();
            let parsed = parse_hgldd(&text).unwrap();
            assert_eq!(parsed, f.debug);
            assert_eq!(parsed.to_json_string(), text);
        }
    }
}

#[test]
fn generated_traces_round_trip_through_text() {
    for design in [listing1_fixture(), enum_cpu_fixture()] {
        for s in Strategy::ALL {
            let f = flatten_design(&design, s).unwrap();
            let parsed = parse_vcd_str(&f.trace.to_vcd_string()).unwrap();
            assert_eq!(parsed, f.trace);
        }
    }
}

#[test]
fn split_debug_merges_back() {
    let f = flatten_design(&listing1_fixture(), Strategy::Leaf).unwrap();
    let merged = tyvcd::merge_documents(f.split_debug()).unwrap();
    let by_name = |d: &tyvcd::HglddDocument| -> HashMap<String, String> {
        d.modules.iter().map(|m| (m.name.clone(), format!("{m:?}"))).collect()
    };
    assert_eq!(by_name(&merged), by_name(&f.debug));
    assert_eq!(merged.top, f.debug.top);
    assert_eq!(merged.enums, f.debug.enums);
}
