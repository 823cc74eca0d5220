use miblp::ccg::{self, CcgConfig};
use miblp::gen::{self, HscpParams, RandomGenParams};
use std::time::Instant;

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let which = args.get(1).map(String::as_str).unwrap_or("random");
    let config = CcgConfig::default();
    match which {
        "random" => {
            for seed in 1..=10u64 {
                let inst = gen::generate_random(&RandomGenParams { half_nt: 10, std: 2.0, seed }).unwrap();
                let t0 = Instant::now();
                match ccg::solve(&inst, &config) {
                    Ok(rep) => println!(
                        "random seed {seed}: {:?} lb {:.3} ub {:.3} iters {} in {:.2}s",
                        rep.status, rep.lb, rep.ub, rep.master_solves(), t0.elapsed().as_secs_f64()
                    ),
                    Err(e) => println!("random seed {seed}: ERROR {e}"),
                }
            }
        }
        "tiny" => {
            for seed in 1..=20u64 {
                let half = 2 + (seed % 5) as usize;
                let inst = gen::generate_random(&RandomGenParams { half_nt: half, std: 1.0, seed }).unwrap();
                let t0 = Instant::now();
                match ccg::solve(&inst, &config) {
                    Ok(rep) => println!(
                        "tiny seed {seed} (half {half}): {:?} ub {:.4} iters {} in {:.2}s",
                        rep.status, rep.ub, rep.master_solves(), t0.elapsed().as_secs_f64()
                    ),
                    Err(e) => println!("tiny seed {seed}: ERROR {e}"),
                }
            }
        }
        "hscp" => {
            for seed in 1..=3u64 {
                let inst = gen::generate_hscp(&HscpParams { n_plants: 6, n_products: 6, seed, q: 230.0 }).unwrap();
                let t0 = Instant::now();
                match ccg::solve(&inst, &config) {
                    Ok(rep) => println!(
                        "hscp seed {seed}: {:?} lb {:.3} ub {:.3} iters {} in {:.2}s",
                        rep.status, rep.lb, rep.ub, rep.master_solves(), t0.elapsed().as_secs_f64()
                    ),
                    Err(e) => println!("hscp seed {seed}: ERROR {e}"),
                }
            }
        }
        _ => {}
    }
}
