fn main() {
    std::process::exit(irh_bh::cli::run(std::env::args_os()));
}
