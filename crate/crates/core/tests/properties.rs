use proptest::prelude::*;
use rand::SeedableRng;
use srmq_core::bits::{
    excess_array, findopen_oracle, gamma_len, gamma_read, gamma_write, match_all,
};
use srmq_core::cartesian::{cartesian_equivalent, dfuds_decode, dfuds_encode};
use srmq_core::catalan::{binomial, interleave_rank, interleave_unrank, tree_rank, tree_unrank};
use srmq_core::hardgen::{self, Block, SetSampler};
use srmq_core::*;

fn array(max_n: usize) -> impl Strategy<Value = Vec<i64>> {
    prop::collection::vec(0i64..20, 1..max_n)
}

fn balanced() -> impl Strategy<Value = BitVec> {
    prop::collection::vec(any::<bool>(), 1..80).prop_map(|coins| {
        let half = coins.len();
        let (mut o, mut c) = (0, 0);
        let mut out = Vec::new();
        let mut it = coins.into_iter().cycle();
        while c < half {
            if o < half && (o == c || it.next().unwrap()) {
                out.push(true);
                o += 1;
            } else {
                out.push(false);
                c += 1;
            }
        }
        BitVec::from_bools(&out)
    })
}

fn params() -> impl Strategy<Value = ParenParams> {
    (0u32..3, 0u32..4, 0usize..4).prop_map(|(b, l, d)| ParenParams {
        b_br: 2 << b,
        leaf: 1 << l,
        depth: d,
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn onebit_matches_scan(a in array(48)) {
        let ds = OneBitRmq::build(&a).unwrap();
        for i in 1..=a.len() {
            for j in i..=a.len() {
                prop_assert_eq!(ds.query(i, j).unwrap(), rmq_scan(&a, i, j).unwrap());
            }
        }
        prop_assert!(ds.accounted_bits() <= ds.benchmark_bits() + 1.0);
    }

    #[test]
    fn tradeoff_matches_scan(a in array(200), t in 1usize..4, p in params()) {
        for ds in [TradeoffRmq::build(&a, t).unwrap(), TradeoffRmq::build_with_params(&a, t, p).unwrap()] {
            prop_assert_eq!(ds.total_bits(), ds.dfuds_bits() + 2 + ds.parens().aux_bits());
            for i in (1..=a.len()).step_by(3) {
                for j in i..=a.len() {
                    prop_assert_eq!(ds.query(i, j).unwrap(), rmq_scan(&a, i, j).unwrap());
                }
            }
        }
    }

    #[test]
    fn paren_ops_match_oracles(s in balanced(), p in params()) {
        let bp = BalancedParens::new(s.clone(), p).unwrap();
        let opens = match_all(&s).unwrap();
        let e = excess_array(&s);
        prop_assert!(bp.pioneer_count() == 0 || bp.pioneer_count() + 3 <= 4 * bp.block_count());
        for c in (1..=s.len()).filter(|&c| !s.get(c - 1)) {
            prop_assert_eq!(bp.findopen(c).unwrap(), opens[c]);
            prop_assert_eq!(findopen_oracle(&s, c).unwrap(), opens[c]);
        }
        for x in 1..=s.len() {
            prop_assert_eq!(bp.excess(x).unwrap(), e[x - 1]);
            let y = (x + 7).min(s.len());
            let want = (x..=y).min_by_key(|&q| (e[q - 1], q)).unwrap();
            prop_assert_eq!(bp.pm1rmq(x, y).unwrap(), want);
        }
    }

    #[test]
    fn structures_survive_serialization(a in array(64), t in 1usize..4) {
        let built = [
            Structure::OneBit(OneBitRmq::build(&a).unwrap()),
            Structure::Tradeoff(TradeoffRmq::build(&a, t).unwrap()),
            Structure::Sparse(SparseTable::build(&a)),
        ];
        for s in built {
            let mut bytes = Vec::new();
            s.write_to(&mut bytes).unwrap();
            let back = Structure::read_from(&mut bytes.as_slice()).unwrap();
            prop_assert_eq!(back.kind(), s.kind());
            let mut p = ProbeCounter::disabled();
            for i in 1..=a.len() {
                prop_assert_eq!(back.query_probed(i, a.len(), &mut p).unwrap(), rmq_scan(&a, i, a.len()).unwrap());
            }
            bytes.push(0);
            prop_assert!(Structure::read_from(&mut bytes.as_slice()).is_err());
        }
    }

    #[test]
    fn dfuds_round_trip(a in array(100)) {
        let t = build_cartesian(&a);
        let d = dfuds_encode(&t);
        prop_assert_eq!(d.middle.len(), 2 * a.len());
        let back = dfuds_decode(&d).unwrap();
        prop_assert!(cartesian_equivalent(&back.realize(), &a));
    }

    #[test]
    fn tree_ranking_is_bijective(n in 1usize..30, seed in any::<u64>()) {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let z = num_bigint::RandBigInt::gen_biguint_below(&mut rng, &catalan_number(n as u64)) + 1u32;
        let t = tree_unrank(n, &z).unwrap();
        prop_assert_eq!(tree_rank(&t).unwrap(), z);
    }

    #[test]
    fn interleave_ranking_is_bijective(a in 0u64..12, b in 0u64..12, seed in any::<u64>()) {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let k = num_bigint::RandBigInt::gen_biguint_below(&mut rng, &binomial(a + b, a)) + 1u32;
        let bits = interleave_unrank(a, b, &k).unwrap();
        prop_assert_eq!(bits.iter().filter(|&&x| x).count() as u64, b);
        prop_assert_eq!(interleave_rank(&bits), k);
    }

    #[test]
    fn gamma_round_trip(xs in prop::collection::vec(1u64..u64::MAX, 1..20)) {
        let mut w = BitWriter::new();
        for &x in &xs {
            gamma_write(&mut w, x);
        }
        let bits = w.finish();
        prop_assert_eq!(bits.len(), xs.iter().map(|&x| gamma_len(x)).sum::<usize>());
        let mut r = BitReader::new(&bits);
        for &x in &xs {
            prop_assert_eq!(gamma_read(&mut r).unwrap(), x);
        }
    }

    #[test]
    fn rank_select_agree_with_naive(bools in prop::collection::vec(any::<bool>(), 0..700)) {
        let rs = RankSelect::new(BitVec::from_bools(&bools));
        let mut ones = 0;
        let mut zeros = 0;
        for (i, &b) in bools.iter().enumerate() {
            prop_assert_eq!(rs.rank1(i), ones);
            if b {
                ones += 1;
                prop_assert_eq!(rs.select1(ones), Some(i + 1));
            } else {
                zeros += 1;
                prop_assert_eq!(rs.select0(zeros), Some(i + 1));
            }
        }
        prop_assert_eq!(rs.count_ones(), ones);
    }

    #[test]
    fn sampler_sets_are_valid(b in 1u64..600, frac in 0.0f64..1.0, seed in any::<u64>()) {
        let u = (b as f64 * frac) as u64;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let s = SetSampler::new(b, u).unwrap().sample(&mut rng);
        prop_assert_eq!(s.len() as u64, u);
        prop_assert!(s.windows(2).all(|w| w[0] < w[1]));
        prop_assert!(s.iter().all(|&x| (1..=b).contains(&x)));
        prop_assert_eq!(hardgen::gaps(&s, b).iter().sum::<u64>() + u, b);
    }

    #[test]
    fn ext_code_round_trips(pts in prop::collection::btree_set(1u64..=200, 0..40), keep in any::<u64>(), k in 1u64..40, d in 1u64..100) {
        let pts: Vec<u64> = pts.into_iter().collect();
        let block = Block { x: 1, y: 200, m: 14 };
        let (l, _) = hardgen::window_shape(block, k).unwrap();
        let delta = 1 + d % l;
        let sub: Vec<u64> = pts.iter().copied().enumerate().filter(|(i, _)| keep >> (i % 64) & 1 == 1).map(|(_, p)| p).collect();
        let code = hardgen::ext_encode(&pts, block, k, delta, &sub).unwrap();
        let want = hardgen::indicators(&pts, block, k, delta).unwrap();
        prop_assert_eq!(hardgen::ext_decode(&code, &sub, block, k, delta).unwrap(), want);
    }
}

#[test]
fn corrupted_files_are_rejected() {
    let a: Vec<i64> = (0..50).map(|i| (i * 37 % 11) as i64).collect();
    let ds = TradeoffRmq::build(&a, 2).unwrap();
    let mut bytes = ds.to_bytes();
    let mid = bytes.len() / 2;
    bytes[mid] ^= 0x10;
    assert!(Structure::read_from(&mut bytes.as_slice()).is_err());
    let mut bytes = OneBitRmq::build(&a).unwrap().to_bytes();
    bytes[0] = b'X';
    assert!(matches!(
        Structure::read_from(&mut bytes.as_slice()),
        Err(Error::Format(_))
    ));
    assert!(Structure::read_from(&mut &bytes[..5]).is_err());
}
