fn main() {
    std::process::exit(roughcalc_cli::run(std::env::args_os()));
}
