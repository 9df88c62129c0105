fn main() {
    let rows = reforge::bench::bench(&reforge::benchmarks::Benchmark::ALL, &Default::default()).unwrap();
    reforge::bench::write_csv(&rows, std::io::stdout()).unwrap();
}
