fn main() {
    std::process::exit(telltale::cli::dispatch(std::env::args_os()));
}
