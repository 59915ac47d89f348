fn main() {
    std::process::exit(pica_harness::cli::run(std::env::args_os()));
}
