fn main() {
    std::process::exit(owc_ratesplit::runner::cli_main(std::env::args_os()));
}
