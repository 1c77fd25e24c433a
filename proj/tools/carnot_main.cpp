// Batch experiment runner: every subcommand writes its artifacts plus a
// fully-resolved config.txt; rerunning with --config <that file> reproduces
// the outputs byte-for-byte on one platform. Command-line flags override
// config-file entries.

#include <cinttypes>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "nlohmann/json.hpp"

#include "carnot/chow.hpp"
#include "carnot/density.hpp"
#include "carnot/fbm.hpp"
#include "carnot/parallel.hpp"
#include "carnot/rng.hpp"
#include "carnot/signature.hpp"

namespace fs = std::filesystem;
using nlohmann::ordered_json;

namespace {

std::string fmt17(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::string join_list(const std::vector<double>& v) {
    std::string out;
    for (size_t i = 0; i < v.size(); ++i) {
        if (i) out += ",";
        out += fmt17(v[i]);
    }
    return out;
}

std::vector<double> parse_list(const std::string& s) {
    std::vector<double> out;
    std::stringstream ss(s);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
        if (!tok.empty()) out.push_back(std::stod(tok));
    }
    return out;
}

struct KeyValues {
    std::vector<std::pair<std::string, std::string>> items;
    void add(const std::string& k, const std::string& v) { items.emplace_back(k, v); }
    void add(const std::string& k, double v) { items.emplace_back(k, fmt17(v)); }
    void add(const std::string& k, int v) { items.emplace_back(k, std::to_string(v)); }
    void add(const std::string& k, int64_t v) { items.emplace_back(k, std::to_string(v)); }
    void add(const std::string& k, uint64_t v) { items.emplace_back(k, std::to_string(v)); }
};

void write_config(const fs::path& out_dir, const std::string& command, const KeyValues& kv) {
    std::ofstream f(out_dir / "config.txt");
    if (!f) throw std::runtime_error("cannot write config file");
    f << "command=" << command << "\n";
    for (const auto& [k, v] : kv.items) f << k << "=" << v << "\n";
}

void write_json(const fs::path& file, const ordered_json& j) {
    std::ofstream f(file);
    if (!f) throw std::runtime_error("cannot write " + file.string());
    f << j.dump(2) << "\n";
}

void write_csv(const fs::path& file, const std::string& header,
               const std::vector<std::string>& rows) {
    std::ofstream f(file);
    if (!f) throw std::runtime_error("cannot write " + file.string());
    f << header << "\n";
    for (const auto& r : rows) f << r << "\n";
}

ordered_json group_element_json(const carnot::GroupElement& g) {
    ordered_json j;
    auto labels = ordered_json::array();
    auto coords = ordered_json::array();
    for (int i = 0; i < g.n(); ++i) {
        labels.push_back(g.basis->bracket_string(i));
        coords.push_back(g.coords(i));
    }
    j["d"] = g.basis->d();
    j["N"] = g.basis->N();
    j["labels"] = labels;
    j["coordinates"] = coords;
    return j;
}

ordered_json estimate_json(const carnot::DistanceEstimate& est, const std::string& cert_ref) {
    ordered_json j;
    switch (est.kind) {
        case carnot::DistanceKind::cc_upper: j["kind"] = "cc_upper"; break;
        case carnot::DistanceKind::d_value: j["kind"] = "d_value"; break;
        case carnot::DistanceKind::dR_value: j["kind"] = "dR_value"; break;
    }
    j["value"] = est.value;
    j["residual"] = est.residual;
    j["converged"] = est.converged;
    j["nondegenerate"] = est.nondegenerate;
    j["min_singular_value"] = est.min_singular_value;
    j["rank"] = est.jacobian_rank;
    j["certificate_path_ref"] = cert_ref;
    j["note"] = "value is a certified upper bound, not the infimum";
    return j;
}

// Pre-pass: when --config FILE appears, splice the file's entries as argv
// tokens ahead of the explicit flags, so TakeLast lets flags override.
std::vector<std::string> expand_config(int argc, char** argv) {
    std::vector<std::string> args(argv + 1, argv + argc);
    std::string config_file;
    for (size_t i = 0; i < args.size(); ++i) {
        if (args[i] == "--config") {
            if (i + 1 >= args.size()) throw CLI::ValidationError("--config needs a file argument");
            config_file = args[i + 1];
            args.erase(args.begin() + static_cast<ptrdiff_t>(i),
                       args.begin() + static_cast<ptrdiff_t>(i) + 2);
            break;
        }
        if (args[i].rfind("--config=", 0) == 0) {
            config_file = args[i].substr(9);
            args.erase(args.begin() + static_cast<ptrdiff_t>(i));
            break;
        }
    }
    if (config_file.empty()) return args;

    std::ifstream f(config_file);
    if (!f) throw CLI::ValidationError("cannot open config file: " + config_file);
    std::string command;
    std::vector<std::string> file_args;
    std::string line;
    while (std::getline(f, line)) {
        if (line.empty() || line[0] == '#') continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) continue;
        const std::string key = line.substr(0, eq);
        const std::string value = line.substr(eq + 1);
        if (key == "command") {
            command = value;
        } else {
            file_args.push_back("--" + key + "=" + value);
        }
    }
    if (command.empty()) throw CLI::ValidationError("config file lacks a command entry");
    std::vector<std::string> merged;
    merged.push_back(command);
    for (auto& a : file_args) merged.push_back(std::move(a));
    // explicit tokens last: they win under TakeLast
    for (auto& a : args) {
        if (a == command) continue;  // tolerate restating the subcommand
        merged.push_back(std::move(a));
    }
    return merged;
}

struct Common {
    std::string out_dir = "out";
    uint64_t seed = 1;
    int threads = 0;

    void attach(CLI::App* cmd) {
        cmd->add_option("--out-dir", out_dir, "Output directory (created if missing)")
            ->capture_default_str();
        cmd->add_option("--seed", seed, "Master seed; all randomness derives from it")
            ->capture_default_str();
        cmd->add_option("--threads", threads,
                        "Worker threads (0 = machine parallelism); results do not depend on it")
            ->capture_default_str();
    }
    fs::path prepare() const {
        fs::create_directories(out_dir);
        return out_dir;
    }
    void record(KeyValues& kv) const {
        kv.add("out-dir", out_dir);
        kv.add("seed", seed);
        kv.add("threads", threads);
    }
};

void emit_check_report(const fs::path& dir, const std::string& stem,
                       const carnot::CheckReport& rep) {
    write_json(dir / (stem + ".json"), rep.details);
    write_csv(dir / (stem + ".csv"), rep.csv_header, rep.csv_rows);
    std::cout << rep.name << ": " << (rep.pass ? "PASS" : "FAIL") << "\n";
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Free Carnot group arithmetic, path signatures, fBm sampling and "
                 "log-signature density experiments"};
    app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
    app.require_subcommand(1);

    // ---- dims ----------------------------------------------------------
    auto* c_dims = app.add_subcommand("dims", "Layer dimensions and homogeneous dimension");
    int dims_d = 2, dims_N = 5;
    Common dims_common;
    c_dims->add_option("--d", dims_d, "Alphabet size")->capture_default_str();
    c_dims->add_option("--N", dims_N, "Truncation level")->capture_default_str();
    dims_common.attach(c_dims);

    // ---- basis ---------------------------------------------------------
    auto* c_basis = app.add_subcommand("basis", "Dump the bracket basis as JSON");
    int basis_d = 2, basis_N = 3;
    Common basis_common;
    c_basis->add_option("--d", basis_d, "Alphabet size")->capture_default_str();
    c_basis->add_option("--N", basis_N, "Truncation level")->capture_default_str();
    basis_common.attach(c_basis);

    // ---- signature -----------------------------------------------------
    auto* c_sig = app.add_subcommand("signature", "Log-signature of a path CSV");
    std::string sig_path;
    int sig_d = 2, sig_N = 2;
    Common sig_common;
    c_sig->add_option("--path", sig_path, "Input CSV with header t,x1,...,xd")->required();
    c_sig->add_option("--d", sig_d, "Path dimension (must match the CSV)")->capture_default_str();
    c_sig->add_option("--N", sig_N, "Truncation level")->capture_default_str();
    sig_common.attach(c_sig);

    // ---- sample --------------------------------------------------------
    auto* c_sample = app.add_subcommand("sample", "Monte Carlo log-signature sample set");
    double sample_H = 0.5, sample_t = 1.0;
    int sample_d = 2, sample_N = 2, sample_steps = 0;
    int64_t sample_count = 1000;
    bool sample_paths = false;
    Common sample_common;
    c_sample->add_option("--H", sample_H, "Hurst parameter in (1/4,1)")->capture_default_str();
    c_sample->add_option("--t", sample_t, "Terminal time")->capture_default_str();
    c_sample->add_option("--d", sample_d, "Path dimension")->capture_default_str();
    c_sample->add_option("--N", sample_N, "Truncation level")->capture_default_str();
    c_sample->add_option("--steps", sample_steps, "fBm grid points (0 = default for H)")
        ->capture_default_str();
    c_sample->add_option("--count", sample_count, "Number of samples")->capture_default_str();
    c_sample->add_flag("--emit-paths", sample_paths,
                       "Also dump the driving fBm batch (CSV + binary)");
    sample_common.attach(c_sample);

    // ---- density -------------------------------------------------------
    auto* c_density = app.add_subcommand("density", "KDE estimate of the log-signature density");
    double den_H = 0.5, den_t = 1.0;
    int den_d = 2, den_N = 2, den_steps = 0;
    int64_t den_count = 100000;
    std::vector<std::string> den_points;
    std::string den_bandwidth = "auto";
    Common den_common;
    c_density->add_option("--H", den_H, "Hurst parameter in (1/4,1)")->capture_default_str();
    c_density->add_option("--t", den_t, "Terminal time")->capture_default_str();
    c_density->add_option("--d", den_d, "Path dimension")->capture_default_str();
    c_density->add_option("--N", den_N, "Truncation level")->capture_default_str();
    c_density->add_option("--steps", den_steps, "fBm grid points (0 = default for H)")
        ->capture_default_str();
    c_density->add_option("--count", den_count, "Number of samples")->capture_default_str();
    c_density
        ->add_option("--point", den_points,
                     "Evaluation point, comma-separated coordinates (repeatable)")
        ->required()
        ->multi_option_policy(CLI::MultiOptionPolicy::TakeAll);
    c_density->add_option("--bandwidth", den_bandwidth,
                          "auto or comma-separated per-coordinate bandwidths")
        ->capture_default_str();
    den_common.attach(c_density);

    // ---- scaling-check -------------------------------------------------
    auto* c_scaling = app.add_subcommand("scaling-check",
                                         "Dilation scaling law of the density across t");
    double sc_H = 0.5;
    int sc_d = 2, sc_N = 2, sc_steps = 0;
    int64_t sc_count = 1000000;
    std::string sc_tlist = "0.25,1";
    std::vector<std::string> sc_points;
    Common sc_common;
    c_scaling->add_option("--H", sc_H, "Hurst parameter")->capture_default_str();
    c_scaling->add_option("--d", sc_d, "Path dimension")->capture_default_str();
    c_scaling->add_option("--N", sc_N, "Truncation level")->capture_default_str();
    c_scaling->add_option("--steps", sc_steps, "fBm grid points (0 = default)")
        ->capture_default_str();
    c_scaling->add_option("--count", sc_count, "Samples per t")->capture_default_str();
    c_scaling->add_option("--t-list", sc_tlist, "Comma-separated t values")->capture_default_str();
    c_scaling
        ->add_option("--point", sc_points, "Evaluation point near the bulk (repeatable)")
        ->multi_option_policy(CLI::MultiOptionPolicy::TakeAll);
    sc_common.attach(c_scaling);

    // ---- tail ----------------------------------------------------------
    auto* c_tail = app.add_subcommand("tail", "Gaussian-tail fit of the homogeneous norm");
    double tail_H = 0.5, tail_qlo = 0.5, tail_qhi = 0.9999;
    int tail_d = 2, tail_N = 2, tail_steps = 0, tail_bins = 24;
    int64_t tail_count = 1000000;
    Common tail_common;
    c_tail->add_option("--H", tail_H, "Hurst parameter")->capture_default_str();
    c_tail->add_option("--d", tail_d, "Path dimension")->capture_default_str();
    c_tail->add_option("--N", tail_N, "Truncation level")->capture_default_str();
    c_tail->add_option("--steps", tail_steps, "fBm grid points (0 = default)")
        ->capture_default_str();
    c_tail->add_option("--count", tail_count, "Number of samples")->capture_default_str();
    c_tail->add_option("--quantile-lo", tail_qlo, "Lower quantile of the r-grid")
        ->capture_default_str();
    c_tail->add_option("--quantile-hi", tail_qhi, "Upper quantile of the r-grid")
        ->capture_default_str();
    c_tail->add_option("--bins", tail_bins, "Number of r-grid points")->capture_default_str();
    tail_common.attach(c_tail);

    // ---- lower-bound ---------------------------------------------------
    auto* c_lower = app.add_subcommand("lower-bound",
                                       "Scaled density floors over small homogeneous balls");
    double lb_H = 0.5;
    int lb_d = 2, lb_N = 2, lb_steps = 0, lb_points = 12;
    int64_t lb_count = 1000000;
    std::string lb_tlist = "0.25,0.5,1";
    Common lb_common;
    c_lower->add_option("--H", lb_H, "Hurst parameter")->capture_default_str();
    c_lower->add_option("--d", lb_d, "Path dimension")->capture_default_str();
    c_lower->add_option("--N", lb_N, "Truncation level")->capture_default_str();
    c_lower->add_option("--steps", lb_steps, "fBm grid points (0 = default)")
        ->capture_default_str();
    c_lower->add_option("--count", lb_count, "Samples per t")->capture_default_str();
    c_lower->add_option("--t-list", lb_tlist, "Comma-separated t values")->capture_default_str();
    c_lower->add_option("--points-per-t", lb_points, "Evaluation points inside each ball")
        ->capture_default_str();
    lb_common.attach(c_lower);

    // ---- varadhan ------------------------------------------------------
    auto* c_var = app.add_subcommand("varadhan",
                                     "Small-noise bracket for eps^2 log p_eps(u)");
    double var_H = 0.5, var_lambda = 0.0;
    int var_d = 2, var_N = 2, var_steps = 0, var_grid = 32, var_segments = 48, var_scan = 6;
    int64_t var_count = 1000000;
    std::string var_u = "0,0,0.2";
    std::string var_eps = "0.8,0.6,0.5,0.4,0.3";
    Common var_common;
    c_var->add_option("--H", var_H, "Hurst parameter")->capture_default_str();
    c_var->add_option("--d", var_d, "Path dimension")->capture_default_str();
    c_var->add_option("--N", var_N, "Truncation level")->capture_default_str();
    c_var->add_option("--steps", var_steps, "fBm grid points (0 = default)")
        ->capture_default_str();
    c_var->add_option("--count", var_count, "Samples per eps")->capture_default_str();
    c_var->add_option("--u", var_u, "Target coordinates, comma-separated")->capture_default_str();
    c_var->add_option("--eps-list", var_eps, "Comma-separated eps values")->capture_default_str();
    c_var->add_option("--lambda", var_lambda,
                      "Nonzero: also check homogeneity of the limit at Delta_lambda u")
        ->capture_default_str();
    c_var->add_option("--grid", var_grid, "Grid size for the distance optimizer")
        ->capture_default_str();
    c_var->add_option("--segments", var_segments, "Segments for the CC estimate in the scan")
        ->capture_default_str();
    c_var->add_option("--scan-samples", var_scan, "Equivalence-scan samples for the lower proxy")
        ->capture_default_str();
    var_common.attach(c_var);

    // ---- chow ----------------------------------------------------------
    auto* c_chow = app.add_subcommand("chow", "Piecewise-linear path hitting a group target");
    int chow_d = 2, chow_N = 2, chow_random = 0;
    std::string chow_target = "0,0,1";
    Common chow_common;
    c_chow->add_option("--d", chow_d, "Path dimension")->capture_default_str();
    c_chow->add_option("--N", chow_N, "Truncation level")->capture_default_str();
    c_chow->add_option("--target", chow_target, "Target coordinates, comma-separated")
        ->capture_default_str();
    c_chow->add_option("--random", chow_random,
                       "Solve this many random targets instead of --target")
        ->capture_default_str();
    chow_common.attach(c_chow);

    // ---- ccdist --------------------------------------------------------
    auto* c_cc = app.add_subcommand("ccdist", "Carnot-Caratheodory norm upper bound");
    int cc_d = 2, cc_N = 2, cc_segments = 64, cc_multistarts = 8;
    std::string cc_target = "0,0,1";
    Common cc_common;
    c_cc->add_option("--d", cc_d, "Path dimension")->capture_default_str();
    c_cc->add_option("--N", cc_N, "Truncation level")->capture_default_str();
    c_cc->add_option("--target", cc_target, "Target coordinates, comma-separated")
        ->capture_default_str();
    c_cc->add_option("--segments", cc_segments, "Path segments (>= n)")->capture_default_str();
    c_cc->add_option("--multistarts", cc_multistarts, "Optimizer multi-starts")
        ->capture_default_str();
    cc_common.attach(c_cc);

    // ---- cdist ---------------------------------------------------------
    auto* c_cd = app.add_subcommand("cdist", "Controlling distance upper bound (d or dR)");
    double cd_H = 0.5;
    int cd_d = 2, cd_N = 2, cd_grid = 32, cd_multistarts = 8;
    std::string cd_target = "0,0,1";
    std::string cd_mode = "d";
    Common cd_common;
    c_cd->add_option("--H", cd_H, "Hurst parameter in (1/4,1)")->capture_default_str();
    c_cd->add_option("--d", cd_d, "Path dimension")->capture_default_str();
    c_cd->add_option("--N", cd_N, "Truncation level")->capture_default_str();
    c_cd->add_option("--target", cd_target, "Target coordinates, comma-separated")
        ->capture_default_str();
    c_cd->add_option("--grid", cd_grid, "Control grid size (>= n)")->capture_default_str();
    c_cd->add_option("--mode", cd_mode, "d or dR")
        ->check(CLI::IsMember({"d", "dR"}))
        ->capture_default_str();
    c_cd->add_option("--multistarts", cd_multistarts, "Optimizer multi-starts")
        ->capture_default_str();
    cd_common.attach(c_cd);

    // ---- equiv-scan ----------------------------------------------------
    auto* c_scan = app.add_subcommand("equiv-scan",
                                      "Distance ratios over the unit homogeneous sphere");
    double scan_H = 0.75, scan_lambda = 2.0;
    int scan_d = 2, scan_N = 2, scan_samples = 20, scan_grid = 32, scan_segments = 48;
    int scan_dilation_checks = 0;
    Common scan_common;
    c_scan->add_option("--H", scan_H, "Hurst parameter")->capture_default_str();
    c_scan->add_option("--d", scan_d, "Path dimension")->capture_default_str();
    c_scan->add_option("--N", scan_N, "Truncation level")->capture_default_str();
    c_scan->add_option("--samples", scan_samples, "Scan samples")->capture_default_str();
    c_scan->add_option("--grid", scan_grid, "Control grid size")->capture_default_str();
    c_scan->add_option("--segments", scan_segments, "Segments for the CC estimate")
        ->capture_default_str();
    c_scan->add_option("--dilation-checks", scan_dilation_checks,
                       "Check d(Delta_lambda u) = lambda d(u) on this many samples")
        ->capture_default_str();
    c_scan->add_option("--lambda", scan_lambda, "Dilation factor for the checks")
        ->capture_default_str();
    scan_common.attach(c_scan);

    std::vector<std::string> args;
    try {
        args = expand_config(argc, argv);
    } catch (const CLI::Error& e) {
        std::cerr << e.what() << "\n";
        return 2;
    }
    try {
        std::vector<const char*> cargs;
        cargs.push_back(argv[0]);
        for (const auto& a : args) cargs.push_back(a.c_str());
        app.parse(static_cast<int>(cargs.size()), cargs.data());
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 2;
    }

    try {
        if (*c_dims) {
            const fs::path dir = dims_common.prepare();
            ordered_json j;
            j["d"] = dims_d;
            j["layer_dims"] = carnot::layer_dims(dims_d, dims_N);
            auto per_level = ordered_json::array();
            std::cout << "layer dims (d=" << dims_d << "): [";
            const auto dims = carnot::layer_dims(dims_d, dims_N);
            for (int k = 1; k <= dims_N; ++k)
                std::cout << dims[static_cast<size_t>(k - 1)] << (k < dims_N ? ", " : "");
            std::cout << "]\n";
            int n = 0;
            for (int k = 1; k <= dims_N; ++k) {
                n += dims[static_cast<size_t>(k - 1)];
                const int nu = carnot::hausdorff_dim(dims_d, k);
                ordered_json row;
                row["N"] = k;
                row["n"] = n;
                row["nu"] = nu;
                per_level.push_back(row);
                std::cout << "N=" << k << ": n=" << n << " nu=" << nu << "\n";
            }
            j["per_level"] = per_level;
            write_json(dir / "dims.json", j);
            KeyValues kv;
            kv.add("d", dims_d);
            kv.add("N", dims_N);
            dims_common.record(kv);
            write_config(dir, "dims", kv);
        } else if (*c_basis) {
            const fs::path dir = basis_common.prepare();
            const auto basis = carnot::get_hall_basis(basis_d, basis_N);
            write_json(dir / "basis.json", basis->to_json());
            std::cout << "basis n=" << basis->n() << " written to " << (dir / "basis.json")
                      << "\n";
            KeyValues kv;
            kv.add("d", basis_d);
            kv.add("N", basis_N);
            basis_common.record(kv);
            write_config(dir, "basis", kv);
        } else if (*c_sig) {
            const fs::path dir = sig_common.prepare();
            const carnot::PLPath p = carnot::read_pl_path_csv(sig_path);
            if (p.dim() != sig_d)
                throw std::invalid_argument("--d does not match the CSV column count");
            const auto g = carnot::log_sig_pl_path(p, carnot::get_hall_basis(sig_d, sig_N));
            const ordered_json j = group_element_json(g);
            write_json(dir / "logsig.json", j);
            std::cout << j.dump(2) << "\n";
            KeyValues kv;
            kv.add("path", sig_path);
            kv.add("d", sig_d);
            kv.add("N", sig_N);
            sig_common.record(kv);
            write_config(dir, "signature", kv);
        } else if (*c_sample) {
            const fs::path dir = sample_common.prepare();
            if (sample_steps <= 0) sample_steps = carnot::default_steps(sample_H);
            const carnot::LogSigSampleSet S =
                carnot::mc_logsig_samples(sample_H, sample_t, sample_d, sample_N, sample_steps,
                                          sample_count, sample_common.seed, sample_common.threads);
            carnot::write_samples_bin((dir / "samples.bin").string(), S);
            carnot::write_samples_csv((dir / "samples.csv").string(), S);
            if (sample_paths) {
                const carnot::FbmBatch batch = carnot::sample_fbm_circulant(
                    sample_steps, sample_t, sample_H, sample_d, sample_count,
                    sample_common.seed, sample_common.threads);
                carnot::write_fbm_bin((dir / "fbm.bin").string(), batch);
                carnot::write_fbm_csv((dir / "fbm.csv").string(), batch);
            }
            std::cout << "wrote " << sample_count << " log-signature samples (n=" << S.n()
                      << ") to " << dir << "\n";
            KeyValues kv;
            kv.add("H", sample_H);
            kv.add("t", sample_t);
            kv.add("d", sample_d);
            kv.add("N", sample_N);
            kv.add("steps", sample_steps);
            kv.add("count", sample_count);
            if (sample_paths) kv.add("emit-paths", "true");
            sample_common.record(kv);
            write_config(dir, "sample", kv);
        } else if (*c_density) {
            const fs::path dir = den_common.prepare();
            if (den_steps <= 0) den_steps = carnot::default_steps(den_H);
            const carnot::LogSigSampleSet S =
                carnot::mc_logsig_samples(den_H, den_t, den_d, den_N, den_steps, den_count,
                                          den_common.seed, den_common.threads);
            Eigen::VectorXd bw;
            if (den_bandwidth != "auto") {
                const auto v = parse_list(den_bandwidth);
                bw = Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
            }
            ordered_json out;
            out["H"] = den_H;
            out["t"] = den_t;
            out["d"] = den_d;
            out["N"] = den_N;
            out["steps"] = den_steps;
            out["count"] = den_count;
            out["seed"] = den_common.seed;
            auto rows = ordered_json::array();
            for (const auto& ps : den_points) {
                const auto v = parse_list(ps);
                if (static_cast<int>(v.size()) != S.n())
                    throw std::invalid_argument("point has wrong dimension (need n=" +
                                                std::to_string(S.n()) + ")");
                const Eigen::VectorXd u =
                    Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
                const auto est = carnot::kde_density(S, u, bw, den_common.threads);
                ordered_json row;
                row["point"] = v;
                row["value"] = est.value;
                row["stderr"] = est.stderr_;
                row["bandwidth"] = std::vector<double>(est.bandwidth.data(),
                                                       est.bandwidth.data() + est.bandwidth.size());
                rows.push_back(row);
                std::cout << "p(" << ps << ") = " << fmt17(est.value) << " +- "
                          << fmt17(est.stderr_) << "\n";
            }
            out["estimates"] = rows;
            write_json(dir / "density.json", out);
            KeyValues kv;
            kv.add("H", den_H);
            kv.add("t", den_t);
            kv.add("d", den_d);
            kv.add("N", den_N);
            kv.add("steps", den_steps);
            kv.add("count", den_count);
            for (const auto& p : den_points) kv.add("point", p);
            kv.add("bandwidth", den_bandwidth);
            den_common.record(kv);
            write_config(dir, "density", kv);
        } else if (*c_scaling) {
            const fs::path dir = sc_common.prepare();
            if (sc_points.empty()) sc_points = {"0.2,0,0.1"};
            std::vector<Eigen::VectorXd> pts;
            for (const auto& ps : sc_points) {
                const auto v = parse_list(ps);
                pts.push_back(Eigen::Map<const Eigen::VectorXd>(
                    v.data(), static_cast<Eigen::Index>(v.size())));
            }
            const auto rep =
                carnot::scaling_check(sc_H, parse_list(sc_tlist), pts, sc_d, sc_N, sc_steps,
                                      sc_count, sc_common.seed, sc_common.threads);
            emit_check_report(dir, "scaling", rep);
            KeyValues kv;
            kv.add("H", sc_H);
            kv.add("d", sc_d);
            kv.add("N", sc_N);
            kv.add("steps", sc_steps);
            kv.add("count", sc_count);
            kv.add("t-list", sc_tlist);
            for (const auto& p : sc_points) kv.add("point", p);
            sc_common.record(kv);
            write_config(dir, "scaling-check", kv);
            if (!rep.pass) return 3;
        } else if (*c_tail) {
            const fs::path dir = tail_common.prepare();
            const auto rep =
                carnot::tail_check(tail_H, tail_d, tail_N, tail_steps, tail_count,
                                   tail_common.seed, tail_qlo, tail_qhi, tail_bins,
                                   tail_common.threads);
            emit_check_report(dir, "tail", rep);
            KeyValues kv;
            kv.add("H", tail_H);
            kv.add("d", tail_d);
            kv.add("N", tail_N);
            kv.add("steps", tail_steps);
            kv.add("count", tail_count);
            kv.add("quantile-lo", tail_qlo);
            kv.add("quantile-hi", tail_qhi);
            kv.add("bins", tail_bins);
            tail_common.record(kv);
            write_config(dir, "tail", kv);
            if (!rep.pass) return 3;
        } else if (*c_lower) {
            const fs::path dir = lb_common.prepare();
            const auto rep = carnot::local_lower_bound_check(
                lb_H, lb_d, lb_N, lb_steps, parse_list(lb_tlist), lb_count, lb_points,
                lb_common.seed, lb_common.threads);
            emit_check_report(dir, "lower_bound", rep);
            KeyValues kv;
            kv.add("H", lb_H);
            kv.add("d", lb_d);
            kv.add("N", lb_N);
            kv.add("steps", lb_steps);
            kv.add("count", lb_count);
            kv.add("t-list", lb_tlist);
            kv.add("points-per-t", lb_points);
            lb_common.record(kv);
            write_config(dir, "lower-bound", kv);
            if (!rep.pass) return 3;
        } else if (*c_var) {
            const fs::path dir = var_common.prepare();
            const auto uv = parse_list(var_u);
            const Eigen::VectorXd u =
                Eigen::Map<const Eigen::VectorXd>(uv.data(), static_cast<Eigen::Index>(uv.size()));
            carnot::VaradhanOptions vopts;
            vopts.eps_list = parse_list(var_eps);
            vopts.grid_size = var_grid;
            vopts.cc_segments = var_segments;
            vopts.scan_samples = var_scan;
            vopts.lambda = var_lambda;
            vopts.threads = var_common.threads;
            const auto rep = carnot::varadhan_check(u, var_H, var_d, var_N, var_steps, var_count,
                                                    var_common.seed, vopts);
            emit_check_report(dir, "varadhan", rep);
            KeyValues kv;
            kv.add("H", var_H);
            kv.add("d", var_d);
            kv.add("N", var_N);
            kv.add("steps", var_steps);
            kv.add("count", var_count);
            kv.add("u", var_u);
            kv.add("eps-list", var_eps);
            kv.add("lambda", var_lambda);
            kv.add("grid", var_grid);
            kv.add("segments", var_segments);
            kv.add("scan-samples", var_scan);
            var_common.record(kv);
            write_config(dir, "varadhan", kv);
            if (!rep.pass) return 3;
        } else if (*c_chow) {
            const fs::path dir = chow_common.prepare();
            const auto basis = carnot::get_hall_basis(chow_d, chow_N);
            ordered_json out;
            carnot::SolveOptions sopts;
            sopts.seed = chow_common.seed;
            if (chow_random > 0) {
                auto rows = ordered_json::array();
                int failures = 0;
                for (int i = 0; i < chow_random; ++i) {
                    carnot::RngStream rng(chow_common.seed, 0x7A36ULL, static_cast<uint64_t>(i));
                    Eigen::VectorXd c(basis->n());
                    for (int j = 0; j < basis->n(); ++j) c(j) = 2.0 * rng.uniform01() - 1.0;
                    const auto g = carnot::make_group_element(basis, c);
                    const auto sol = carnot::second_kind_solve(g, sopts);
                    ordered_json row;
                    row["target"] = std::vector<double>(c.data(), c.data() + c.size());
                    row["residual"] = sol.residual;
                    row["jacobian_rank"] = sol.jacobian_rank;
                    row["converged"] = sol.converged;
                    rows.push_back(row);
                    if (!sol.converged) ++failures;
                }
                out["random_targets"] = rows;
                out["failures"] = failures;
                write_json(dir / "chow.json", out);
                std::cout << "solved " << (chow_random - failures) << "/" << chow_random
                          << " random targets\n";
                if (failures > 0) return 3;
            } else {
                const auto tv = parse_list(chow_target);
                const Eigen::VectorXd c =
                    Eigen::Map<const Eigen::VectorXd>(tv.data(), static_cast<Eigen::Index>(tv.size()));
                const auto g = carnot::make_group_element(basis, c);
                const auto sol = carnot::second_kind_solve(g, sopts);
                const carnot::PLPath path = carnot::chow_path(g, sopts);
                carnot::write_pl_path_csv((dir / "chow_path.csv").string(), path);
                out["target"] = group_element_json(g);
                out["letters"] = sol.letters;
                out["amplitudes"] = std::vector<double>(
                    sol.amplitudes.data(), sol.amplitudes.data() + sol.amplitudes.size());
                out["residual"] = sol.residual;
                out["jacobian_rank"] = sol.jacobian_rank;
                out["converged"] = sol.converged;
                out["certificate_path_ref"] = "chow_path.csv";
                write_json(dir / "chow.json", out);
                std::cout << "residual " << fmt17(sol.residual) << ", path written to "
                          << (dir / "chow_path.csv") << "\n";
            }
            KeyValues kv;
            kv.add("d", chow_d);
            kv.add("N", chow_N);
            kv.add("target", chow_target);
            kv.add("random", chow_random);
            chow_common.record(kv);
            write_config(dir, "chow", kv);
        } else if (*c_cc) {
            const fs::path dir = cc_common.prepare();
            const auto basis = carnot::get_hall_basis(cc_d, cc_N);
            const auto tv = parse_list(cc_target);
            const Eigen::VectorXd c =
                Eigen::Map<const Eigen::VectorXd>(tv.data(), static_cast<Eigen::Index>(tv.size()));
            const auto g = carnot::make_group_element(basis, c);
            carnot::PenaltyOptions popts;
            popts.seed = cc_common.seed;
            popts.threads = cc_common.threads;
            popts.multistarts = cc_multistarts;
            const auto est = carnot::cc_norm_estimate(g, cc_segments, popts);
            carnot::write_pl_path_csv((dir / "cc_path.csv").string(), est.certificate);
            ordered_json out = estimate_json(est, "cc_path.csv");
            out["target"] = group_element_json(g);
            out["segments"] = cc_segments;
            write_json(dir / "ccdist.json", out);
            std::cout << "cc upper bound " << fmt17(est.value) << " (residual "
                      << fmt17(est.residual) << ")\n";
            KeyValues kv;
            kv.add("d", cc_d);
            kv.add("N", cc_N);
            kv.add("target", cc_target);
            kv.add("segments", cc_segments);
            kv.add("multistarts", cc_multistarts);
            cc_common.record(kv);
            write_config(dir, "ccdist", kv);
            if (!est.converged) return 3;
        } else if (*c_cd) {
            const fs::path dir = cd_common.prepare();
            const auto basis = carnot::get_hall_basis(cd_d, cd_N);
            const auto tv = parse_list(cd_target);
            const Eigen::VectorXd c =
                Eigen::Map<const Eigen::VectorXd>(tv.data(), static_cast<Eigen::Index>(tv.size()));
            const auto g = carnot::make_group_element(basis, c);
            carnot::PenaltyOptions popts;
            popts.seed = cd_common.seed;
            popts.threads = cd_common.threads;
            popts.multistarts = cd_multistarts;
            const auto mode = (cd_mode == "d") ? carnot::DistanceMode::d : carnot::DistanceMode::dR;
            const auto est = carnot::controlling_distance(g, cd_H, cd_grid, mode, popts);
            carnot::write_pl_path_csv((dir / "control_path.csv").string(), est.certificate);
            ordered_json out = estimate_json(est, "control_path.csv");
            out["target"] = group_element_json(g);
            out["H"] = cd_H;
            out["grid"] = cd_grid;
            write_json(dir / "cdist.json", out);
            std::cout << cd_mode << " upper bound " << fmt17(est.value) << " (residual "
                      << fmt17(est.residual) << ", nondegenerate " << est.nondegenerate << ")\n";
            KeyValues kv;
            kv.add("H", cd_H);
            kv.add("d", cd_d);
            kv.add("N", cd_N);
            kv.add("target", cd_target);
            kv.add("grid", cd_grid);
            kv.add("mode", cd_mode);
            kv.add("multistarts", cd_multistarts);
            cd_common.record(kv);
            write_config(dir, "cdist", kv);
            if (!est.converged) return 3;
        } else if (*c_scan) {
            const fs::path dir = scan_common.prepare();
            const auto basis = carnot::get_hall_basis(scan_d, scan_N);
            carnot::PenaltyOptions popts;
            popts.threads = scan_common.threads;
            const auto rep = carnot::distance_equivalence_scan(
                basis, scan_H, scan_samples, scan_grid, scan_segments, scan_common.seed, popts,
                scan_dilation_checks, scan_lambda);
            ordered_json out;
            out["H"] = rep.H;
            out["d"] = rep.d;
            out["N"] = rep.N;
            out["samples"] = scan_samples;
            out["ratio_min"] = rep.ratio_min;
            out["ratio_max"] = rep.ratio_max;
            out["cc_ratio_min"] = rep.cc_ratio_min;
            out["cc_ratio_max"] = rep.cc_ratio_max;
            out["all_converged"] = rep.all_converged;
            auto rows = ordered_json::array();
            std::vector<std::string> csv;
            for (size_t i = 0; i < rep.samples.size(); ++i) {
                const auto& s = rep.samples[i];
                const std::string cert = "scan_cert_" + std::to_string(i) + ".csv";
                if (s.d_certificate.times.size() >= 2)
                    carnot::write_pl_path_csv((dir / cert).string(), s.d_certificate);
                ordered_json row;
                row["u"] = std::vector<double>(s.u.data(), s.u.data() + s.u.size());
                row["d_value"] = s.d_value;
                row["dR_value"] = s.dR_value;
                row["cc_value"] = s.cc_value;
                row["d_residual"] = s.d_residual;
                row["rank"] = s.d_rank;
                row["d_converged"] = s.d_converged;
                row["dR_converged"] = s.dR_converged;
                row["cc_converged"] = s.cc_converged;
                row["dR_nondegenerate"] = s.dR_nondegenerate;
                row["certificate_path_ref"] = cert;
                if (s.dilation_ratio != 0.0) row["dilation_ratio"] = s.dilation_ratio;
                rows.push_back(row);
                csv.push_back(std::to_string(i) + ",d," + fmt17(s.d_value));
                csv.push_back(std::to_string(i) + ",dR," + fmt17(s.dR_value));
                csv.push_back(std::to_string(i) + ",cc," + fmt17(s.cc_value));
            }
            out["samples_detail"] = rows;
            write_json(dir / "equiv_scan.json", out);
            write_csv(dir / "equiv_scan.csv", "sample,statistic,value", csv);
            std::cout << "d-ratio range over the unit sphere: [" << fmt17(rep.ratio_min) << ", "
                      << fmt17(rep.ratio_max) << "]\n";
            KeyValues kv;
            kv.add("H", scan_H);
            kv.add("d", scan_d);
            kv.add("N", scan_N);
            kv.add("samples", scan_samples);
            kv.add("grid", scan_grid);
            kv.add("segments", scan_segments);
            kv.add("dilation-checks", scan_dilation_checks);
            kv.add("lambda", scan_lambda);
            scan_common.record(kv);
            write_config(dir, "equiv-scan", kv);
            if (!rep.all_converged) return 3;
        }
    } catch (const std::invalid_argument& e) {
        std::cerr << "invalid input: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "numeric failure: " << e.what() << "\n";
        return 3;
    }
    return 0;
}
