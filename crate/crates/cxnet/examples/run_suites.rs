fn main() {
    let t = std::time::Instant::now();
    for r in cxnet::verify::run_all(7) {
        println!("{} [{:?}]", r.line(), t.elapsed());
    }
}
