fn main() {
    std::process::exit(reconbench_bench::cli::run(std::env::args_os()));
}
