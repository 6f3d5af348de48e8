use std::ffi::{CStr, CString};
use std::ptr;

use gogap_ffi::*;

fn last_error() -> String {
    let p = gogap_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

fn play(color: GogapColor, col: i32, row: i32) -> GogapMove {
    GogapMove { color, col, row }
}

const B: GogapColor = GogapColor::Black;
const W: GogapColor = GogapColor::White;

#[test]
fn capture_and_ko() {
    unsafe {
        let mut board = ptr::null_mut();
        assert_eq!(gogap_board_new(5, 0.5, &mut board), GogapStatus::Ok);
        // ko shape around (1,1)/(2,1)
        for (c, col, row) in [(B, 1, 0), (W, 2, 0), (B, 0, 1), (W, 3, 1), (B, 1, 2), (W, 2, 2), (B, 4, 4), (W, 1, 1)] {
            assert_eq!(gogap_board_play(board, play(c, col, row)), GogapStatus::Ok, "{}", last_error());
        }
        let key_before = gogap_board_key(board);
        assert_eq!(gogap_board_play(board, play(B, 2, 1)), GogapStatus::Ok);
        assert_eq!(gogap_board_prisoners(board, B), 1);
        let mut c = GogapColor::Black;
        assert_eq!(gogap_board_get(board, 1, 1, &mut c), GogapStatus::Ok);
        assert_eq!(c, GogapColor::Empty);
        assert_ne!(gogap_board_key(board), key_before);

        // immediate recapture is a ko violation and leaves the board alone
        let key = gogap_board_key(board);
        assert_eq!(gogap_board_is_legal(board, play(W, 1, 1)), 0);
        assert_eq!(gogap_board_play(board, play(W, 1, 1)), GogapStatus::IllegalMove);
        assert!(last_error().contains("ko"), "{}", last_error());
        assert_eq!(gogap_board_key(board), key);
        assert_eq!(gogap_board_to_move(board), W);

        let mut copy = ptr::null_mut();
        assert_eq!(gogap_board_clone(board, &mut copy), GogapStatus::Ok);
        assert_eq!(gogap_board_play(copy, play(W, -1, -1)), GogapStatus::Ok);
        assert_eq!(gogap_board_to_move(copy), B);
        assert_eq!(gogap_board_to_move(board), W);
        gogap_board_free(copy);
        gogap_board_free(board);
    }
}

#[test]
fn bad_arguments_report_status() {
    unsafe {
        let mut board = ptr::null_mut();
        assert_eq!(gogap_board_new(0, 0.0, &mut board), GogapStatus::InvalidArgument);
        assert_eq!(gogap_board_new(300, 0.0, &mut board), GogapStatus::InvalidArgument);
        assert_eq!(gogap_board_new(9, 0.0, ptr::null_mut()), GogapStatus::NullPointer);
        assert_eq!(gogap_board_play(ptr::null_mut(), play(B, 0, 0)), GogapStatus::NullPointer);
        assert_eq!(gogap_board_key(ptr::null()), 0);
        assert_eq!(gogap_board_to_move(ptr::null()), GogapColor::Empty);

        assert_eq!(gogap_board_new(9, 0.0, &mut board), GogapStatus::Ok);
        assert_eq!(gogap_board_play(board, play(W, 0, 0)), GogapStatus::IllegalMove);
        assert_eq!(gogap_board_play(board, play(B, 9, 0)), GogapStatus::IllegalMove);
        assert_eq!(gogap_board_play(board, play(B, -3, 0)), GogapStatus::IllegalMove);
        assert_eq!(gogap_board_play(board, play(GogapColor::Empty, 0, 0)), GogapStatus::InvalidArgument);
        let mut c = GogapColor::Empty;
        assert_eq!(gogap_board_get(board, 9, 9, &mut c), GogapStatus::OutOfRange);
        gogap_board_free(board);
        gogap_board_free(ptr::null_mut());
        gogap_record_free(ptr::null_mut());
        gogap_string_free(ptr::null_mut());
    }
}

#[test]
fn records_parse_replay_and_serialize() {
    let text = CString::new("(;GM[1]FF[4]SZ[9]KM[6.5]PB[Lee]PW[Fan];B[ee];W[cc];B[];W[tt])").unwrap();
    unsafe {
        let mut rec = ptr::null_mut();
        assert_eq!(gogap_record_parse(text.as_ptr(), &mut rec), GogapStatus::Ok);
        assert_eq!(gogap_record_size(rec), 9);
        assert_eq!(gogap_record_move_count(rec), 4);
        let mut m = play(GogapColor::Empty, 0, 0);
        assert_eq!(gogap_record_move(rec, 0, &mut m), GogapStatus::Ok);
        assert_eq!(m, play(B, 4, 4));
        assert_eq!(gogap_record_move(rec, 3, &mut m), GogapStatus::Ok);
        assert_eq!(m, play(W, -1, -1));
        assert_eq!(gogap_record_move(rec, 4, &mut m), GogapStatus::OutOfRange);

        let mut board = ptr::null_mut();
        assert_eq!(gogap_record_position(rec, 2, &mut board), GogapStatus::Ok);
        let mut c = GogapColor::Empty;
        gogap_board_get(board, 2, 2, &mut c);
        assert_eq!(c, W);
        assert_eq!(gogap_board_to_move(board), B);
        gogap_board_free(board);
        assert_eq!(gogap_record_position(rec, 5, &mut board), GogapStatus::OutOfRange);

        let mut sgf = ptr::null_mut();
        assert_eq!(gogap_record_to_sgf(rec, &mut sgf), GogapStatus::Ok);
        let out = CStr::from_ptr(sgf).to_str().unwrap().to_owned();
        gogap_string_free(sgf);
        assert!(out.contains("PB[Lee]") && out.contains(";W[]"), "{out}");
        let mut again = ptr::null_mut();
        let c_out = CString::new(out).unwrap();
        assert_eq!(gogap_record_parse(c_out.as_ptr(), &mut again), GogapStatus::Ok);
        assert_eq!(gogap_record_move_count(again), 4);
        gogap_record_free(again);
        gogap_record_free(rec);

        let bad = CString::new("(;SZ[9];B[ee;W[").unwrap();
        assert_eq!(gogap_record_parse(bad.as_ptr(), &mut rec), GogapStatus::ParseError);
        assert!(last_error().contains("malformed"), "{}", last_error());
    }
}

#[test]
fn stats_match_the_core_library() {
    let x = [3.1, 2.2, 5.0, 4.4, 3.9, 6.1, 2.8];
    let y = [1.0, 2.1, 1.7, 0.4, 2.9, 1.1];
    let tails = [(GogapTail::Less, gogap::stats::Tail::Less), (GogapTail::Greater, gogap::stats::Tail::Greater), (GogapTail::TwoSided, gogap::stats::Tail::TwoSided)];
    for (ct, t) in tails {
        let mut r = std::mem::MaybeUninit::<GogapTestResult>::uninit();
        unsafe {
            assert_eq!(gogap_welch_t(x.as_ptr(), x.len(), y.as_ptr(), y.len(), ct, r.as_mut_ptr()), GogapStatus::Ok);
            let r = r.assume_init();
            let core = gogap::stats::welch_t(&x, &y, t).unwrap();
            assert_eq!(Some(r.statistic), core.statistic);
            assert_eq!(Some(r.p), core.p);
            assert_eq!(Some(r.effect_size), core.effect_size);
            assert!(r.df2.is_nan());
            assert_eq!((r.n1, r.n2, r.degenerate), (7, 6, 0));
        }
        let mut r = std::mem::MaybeUninit::<GogapTestResult>::uninit();
        unsafe {
            assert_eq!(gogap_wilcoxon_rank_sum(x.as_ptr(), x.len(), y.as_ptr(), y.len(), ct, r.as_mut_ptr()), GogapStatus::Ok);
            assert_eq!(Some(r.assume_init().p), gogap::stats::wilcoxon_rank_sum(&x, &y, t).unwrap().p);
            assert_eq!(gogap_ks_two_sample(x.as_ptr(), x.len(), y.as_ptr(), y.len(), ct, r.as_mut_ptr()), GogapStatus::Ok);
            assert_eq!(Some(r.assume_init().p), gogap::stats::ks_two_sample(&x, &y, t).unwrap().p);
            assert_eq!(gogap_levene(x.as_ptr(), x.len(), y.as_ptr(), y.len(), 1, ct, r.as_mut_ptr()), GogapStatus::Ok);
            let r = r.assume_init();
            let core = gogap::stats::levene(&x, &y, gogap::stats::LeveneCenter::Median, t).unwrap();
            assert_eq!(Some(r.p), core.p);
            assert_eq!((r.df1, r.df2), (1.0, 11.0));
        }
    }
}

#[test]
fn stats_errors_and_degenerate_samples() {
    let one = [1.0];
    let two = [1.0, 2.0];
    let flat = [2.0, 2.0, 2.0];
    let mut r = std::mem::MaybeUninit::<GogapTestResult>::uninit();
    unsafe {
        assert_eq!(gogap_welch_t(one.as_ptr(), 1, two.as_ptr(), 2, GogapTail::TwoSided, r.as_mut_ptr()), GogapStatus::StatsError);
        assert!(last_error().contains("at least"), "{}", last_error());
        let nan = [f64::NAN, 1.0];
        assert_eq!(gogap_welch_t(nan.as_ptr(), 2, two.as_ptr(), 2, GogapTail::TwoSided, r.as_mut_ptr()), GogapStatus::StatsError);
        assert_eq!(gogap_welch_t(ptr::null(), 0, two.as_ptr(), 2, GogapTail::TwoSided, r.as_mut_ptr()), GogapStatus::NullPointer);
        assert_eq!(gogap_welch_t(flat.as_ptr(), 3, flat.as_ptr(), 3, GogapTail::TwoSided, r.as_mut_ptr()), GogapStatus::Ok);
        let r = r.assume_init();
        assert_eq!(r.degenerate, 1);
        assert!(r.p.is_nan());
    }
}

#[test]
fn version_is_a_c_string() {
    let v = unsafe { CStr::from_ptr(gogap_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}
