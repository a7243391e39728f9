fn main() {
    std::process::exit(smc::cli::run(std::env::args_os()));
}
