fn main() {
    std::process::exit(bandit_ope::harness::cli::run(std::env::args_os()));
}
