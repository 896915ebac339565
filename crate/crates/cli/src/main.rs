fn main() {
    std::process::exit(disloc_cli::dispatch(std::env::args_os()));
}
