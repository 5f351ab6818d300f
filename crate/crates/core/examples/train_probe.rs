use std::time::Instant;

use vargan::data::{Dataset, FaceRanges};
use vargan::train::{step, Method, TrainerConfig, TrainingState};

fn main() {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let method: Method = args.first().map(|s| s.parse().unwrap()).unwrap_or(Method::Vargan);
    let steps: u64 = args.get(1).map(|s| s.parse().unwrap()).unwrap_or(200);
    let ds = Dataset::generate(5000, 32, 5, 1, &FaceRanges::default()).unwrap();
    let cfg = TrainerConfig::desk(method);
    let mut state = TrainingState::new(cfg, ds.digest()).unwrap();
    let t = Instant::now();
    for _ in 0..steps {
        let row = step(&mut state, &ds).unwrap();
        if row.step % 50 == 0 {
            println!("{} {:?}", row.step, row.values);
        }
    }
    println!("{:.1} ms/step", t.elapsed().as_secs_f64() * 1e3 / steps as f64);
    if let Some(r) = state.net("reg") {
        let (x, _) = ds.batch(&[0, 1, 2]).unwrap();
        println!("reg(x) = {:?}", &r.forward(&x).unwrap().data()[..10]);
    }
}
