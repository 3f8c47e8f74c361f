fn main() {
    std::process::exit(qsat_cli::parse_and_dispatch(std::env::args_os()));
}
