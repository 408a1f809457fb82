//! The labeling tables in docs/constellations.md are the reference; the
//! mapper must reproduce them exactly.

use otfs_core::modem::Constellation;
use otfs_core::Complex64;

const TABLES: &str = include_str!("../../../docs/constellations.md");

/// `(order, rows)` where each row is `(s, bits, i, q)` in grid units.
fn documented() -> Vec<(usize, Vec<(usize, String, i32, i32)>)> {
    let mut out: Vec<(usize, Vec<_>)> = Vec::new();
    for line in TABLES.lines() {
        if let Some(title) = line.strip_prefix("## ") {
            let order = if title == "QPSK" { 4 } else { title.trim_end_matches("-QAM").parse().unwrap() };
            out.push((order, Vec::new()));
            continue;
        }
        let cells: Vec<&str> = line.split('|').map(str::trim).filter(|c| !c.is_empty()).collect();
        if cells.len() == 4 && cells[0].parse::<usize>().is_ok() {
            let row = (cells[0].parse().unwrap(), cells[1].to_owned(), cells[2].parse().unwrap(), cells[3].parse().unwrap());
            out.last_mut().expect("table before heading").1.push(row);
        }
    }
    out
}

#[test]
fn mapper_reproduces_the_documented_tables() {
    let tables = documented();
    assert_eq!(tables.iter().map(|t| t.0).collect::<Vec<_>>(), [4, 16, 64]);
    for (order, rows) in tables {
        let c = Constellation::new(order).unwrap();
        let levels = (order as f64).sqrt();
        let scale = 1.0 / (2.0 * (levels * levels - 1.0) / 3.0).sqrt();
        assert_eq!(rows.len(), order);
        for (s, bits, i, q) in rows {
            assert_eq!(bits, format!("{s:0width$b}", width = c.bits_per_symbol() as usize));
            let want = Complex64::new(i as f64 * scale, q as f64 * scale);
            assert!((c.map(s) - want).norm() < 1e-15, "{order}-QAM symbol {s}: {} vs {want}", c.map(s));
            assert_eq!(c.demap(want), s);
        }
    }
}

#[test]
fn qpsk_zero_is_the_first_quadrant() {
    let h = std::f64::consts::FRAC_1_SQRT_2;
    assert!((Constellation::qpsk().map(0) - Complex64::new(h, h)).norm() < 1e-15);
}

#[test]
fn unit_energy() {
    for order in [4, 16, 64] {
        let c = Constellation::new(order).unwrap();
        let e: f64 = c.points().iter().map(|p| p.norm_sqr()).sum::<f64>() / order as f64;
        assert!((e - 1.0).abs() < 1e-14, "{order}: {e}");
    }
}

#[test]
fn nearest_neighbours_differ_in_one_bit() {
    for order in [4, 16, 64] {
        let c = Constellation::new(order).unwrap();
        let pts = c.points();
        let dmin = (0..order)
            .flat_map(|a| (0..order).filter(move |&b| b != a).map(move |b| (a, b)))
            .map(|(a, b)| (pts[a] - pts[b]).norm())
            .fold(f64::INFINITY, f64::min);
        let mut pairs = 0;
        for a in 0..order {
            for b in a + 1..order {
                if (pts[a] - pts[b]).norm() < dmin * (1.0 + 1e-9) {
                    assert_eq!((a ^ b).count_ones(), 1, "{order}-QAM: {a} and {b}");
                    pairs += 1;
                }
            }
        }
        let l = (order as f64).sqrt() as usize;
        assert_eq!(pairs, 2 * l * (l - 1));
    }
}

#[test]
fn unsupported_orders_are_rejected() {
    for order in [0, 2, 8, 32, 256] {
        assert!(Constellation::new(order).is_err());
    }
}
