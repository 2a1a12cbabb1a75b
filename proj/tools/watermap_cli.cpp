#include <chrono>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "watermap/dataset.hpp"
#include "watermap/errors.hpp"
#include "watermap/io.hpp"
#include "watermap/kde.hpp"
#include "watermap/kernels.hpp"
#include "watermap/parallel_tsne.hpp"
#include "watermap/similarity.hpp"
#include "watermap/svg.hpp"
#include "watermap/tsne.hpp"
#include "watermap/watertrack.hpp"

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;
using namespace watermap;

namespace {

constexpr const char* kVersion = "0.1.0";

std::string fnv1a64_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError(path + ": cannot open for digest");
    std::uint64_t h = 0xcbf29ce484222325ull;
    char buf[1 << 16];
    while (in.read(buf, sizeof(buf)) || in.gcount() > 0) {
        std::streamsize got = in.gcount();
        for (std::streamsize i = 0; i < got; ++i) {
            h ^= static_cast<unsigned char>(buf[i]);
            h *= 0x100000001b3ull;
        }
        if (got < static_cast<std::streamsize>(sizeof(buf))) break;
    }
    char hex[20];
    std::snprintf(hex, sizeof(hex), "%016llx", static_cast<unsigned long long>(h));
    return std::string("fnv1a64:") + hex;
}

class StageClock {
  public:
    explicit StageClock(json& slot)
        : slot_(slot), start_(std::chrono::steady_clock::now()) {}
    ~StageClock() {
        auto dt = std::chrono::steady_clock::now() - start_;
        slot_ = std::chrono::duration<double>(dt).count();
    }

  private:
    json& slot_;
    std::chrono::steady_clock::time_point start_;
};

kern::Backend parse_backend(const std::string& name) {
    if (name == "auto") return kern::Backend::Auto;
    if (name == "scalar") return kern::Backend::Scalar;
    if (name == "avx2") return kern::Backend::Avx2;
    throw ConfigError("unknown kernel backend '" + name + "'");
}

GmmSpec parse_gmm_spec(const std::string& text) {
    GmmSpec spec;
    bool have_n = false;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        auto eq = item.find('=');
        if (eq == std::string::npos)
            throw ConfigError("gen-gmm expects key=value pairs, got '" + item + "'");
        std::string key = item.substr(0, eq);
        std::string val = item.substr(eq + 1);
        try {
            if (key == "dims") {
                spec.dims = std::stoul(val);
            } else if (key == "components") {
                spec.components = std::stoul(val);
            } else if (key == "n") {
                spec.n = std::stoul(val);
                have_n = true;
            } else if (key == "seed") {
                spec.seed = std::stoull(val);
            } else if (key == "separation") {
                spec.separation = std::stod(val);
            } else {
                throw ConfigError("gen-gmm: unknown key '" + key + "'");
            }
        } catch (const std::invalid_argument&) {
            throw ConfigError("gen-gmm: bad value for '" + key + "'");
        } catch (const std::out_of_range&) {
            throw ConfigError("gen-gmm: value out of range for '" + key + "'");
        }
    }
    if (!have_n) throw ConfigError("gen-gmm needs n=<count>");
    return spec;
}

std::vector<std::size_t> parse_sizes(const std::string& text) {
    std::vector<std::size_t> sizes;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        try {
            sizes.push_back(std::stoul(item));
        } catch (const std::exception&) {
            throw ConfigError("bad size '" + item + "'");
        }
    }
    if (sizes.empty()) throw ConfigError("no sizes given");
    return sizes;
}

std::string path_str(const fs::path& dir, const char* name) {
    return (dir / name).string();
}

void write_peaks_csv(const std::string& path, const Segmentation& seg) {
    std::ofstream out(path);
    if (!out) throw IoError(path + ": cannot open for writing");
    out << "label,cell_x,cell_y,density\n";
    for (std::size_t k = 0; k < seg.peaks.size(); ++k) {
        const auto& p = seg.peaks[k];
        out << (k + 1) << ',' << (p.cell % seg.width) << ',' << (p.cell / seg.width)
            << ',' << io::format_double(p.density) << '\n';
    }
    if (!out) throw IoError(path + ": write failed");
}

void write_labels_raster_csv(const std::string& path, const Segmentation& seg) {
    std::ofstream out(path);
    if (!out) throw IoError(path + ": cannot open for writing");
    for (std::size_t iy = 0; iy < seg.height; ++iy) {
        for (std::size_t ix = 0; ix < seg.width; ++ix) {
            if (ix) out << ',';
            out << seg.labels[iy * seg.width + ix];
        }
        out << '\n';
    }
    if (!out) throw IoError(path + ": write failed");
}

void write_point_labels_csv(const std::string& path,
                            const std::vector<int>& labels) {
    std::ofstream out(path);
    if (!out) throw IoError(path + ": cannot open for writing");
    out << "index,label\n";
    for (std::size_t i = 0; i < labels.size(); ++i)
        out << i << ',' << labels[i] << '\n';
    if (!out) throw IoError(path + ": write failed");
}

void write_label_column(const std::string& path, const std::vector<int>& labels) {
    std::ofstream out(path);
    if (!out) throw IoError(path + ": cannot open for writing");
    for (int v : labels) out << v << '\n';
    if (!out) throw IoError(path + ": write failed");
}

// ---------------------------------------------------------------------------
// Option bags. Every resolved value is echoed into the manifest so a replay
// re-parses the identical configuration.

struct EmbedOpts {
    std::string in;
    std::string gen_gmm;
    std::string format = "csv";
    bool distances = false;
    bool header = false;
    std::size_t whiten_dims = 0;
    double ppx = 30.0;
    std::size_t threads = 4;
    std::size_t layers = 1;
    std::size_t rounds = 1;
    std::uint64_t seed = 1;
    std::size_t epochs = 0; // 0 = default schedule
    std::size_t iters = 0;
    double ppx_tol = 1e-5;
    int ppx_max_iters = 100;
    std::string learning_n = "local";
    std::size_t cores = 0;
    std::string labels;
    std::string out = ".";
    std::string kernels = "auto";
};

struct DensityOpts {
    std::string in;
    double ppx = 30.0;
    std::size_t grid = 200;
    double margin = 4.0;
    double fixed_h = 0.0;
    double ppx_tol = 1e-5;
    int ppx_max_iters = 100;
    std::string out = ".";
    std::string kernels = "auto";
};

struct ClusterOpts {
    std::string values;
    std::string geometry;
    std::string points;
    std::string out = ".";
};

struct EntropyOpts {
    std::string sizes = "100,1000,10000";
    std::size_t samples = 100;
    std::uint64_t seed = 1;
    std::string out = ".";
};

void add_embed_flags(CLI::App* cmd, EmbedOpts& o) {
    cmd->add_option("--in", o.in, "input matrix file");
    cmd->add_option("--gen-gmm", o.gen_gmm,
                    "synthesize a GMM dataset, e.g. dims=5,components=8,n=2000,seed=3");
    cmd->add_option("--format", o.format, "csv | rawbin")
        ->check(CLI::IsMember({"csv", "rawbin"}));
    cmd->add_flag("--distances", o.distances, "input is a precomputed distance matrix");
    cmd->add_flag("--header", o.header, "skip a CSV header row");
    cmd->add_option("--whiten", o.whiten_dims, "PCA-whiten to this many dimensions");
    cmd->add_option("--ppx", o.ppx, "perplexity");
    cmd->add_option("--threads", o.threads, "worker count T");
    cmd->add_option("--layers", o.layers, "layer count L");
    cmd->add_option("--rounds", o.rounds, "round count R");
    cmd->add_option("--seed", o.seed, "master RNG seed");
    cmd->add_option("--epochs", o.epochs, "override epochs per round (default ceil(sqrt(n)))");
    cmd->add_option("--iters", o.iters, "override iterations per epoch (default ceil(sqrt(z)))");
    cmd->add_option("--ppx-tol", o.ppx_tol, "beta search tolerance on ln-perplexity");
    cmd->add_option("--ppx-max-iters", o.ppx_max_iters, "beta search iteration cap");
    cmd->add_option("--learning-n", o.learning_n,
                    "learning-rate point count: local (thread) or global (dataset)")
        ->check(CLI::IsMember({"local", "global"}));
    cmd->add_option("--cores", o.cores, "cap on simultaneously executing workers (0 = off)");
    cmd->add_option("--labels", o.labels, "per-point integer labels CSV for plot colors");
    cmd->add_option("--out", o.out, "output directory");
    cmd->add_option("--kernels", o.kernels, "auto | scalar | avx2")
        ->check(CLI::IsMember({"auto", "scalar", "avx2"}));
    cmd->add_option("--config", "plain key = value file merged under explicit flags");
}

void add_density_flags(CLI::App* cmd, DensityOpts& o, bool with_in) {
    if (with_in) cmd->add_option("--in", o.in, "embedding CSV (index,x,y)")->required();
    cmd->add_option("--ppx", o.ppx, "density perplexity");
    cmd->add_option("--grid", o.grid, "grid cells per axis");
    cmd->add_option("--margin", o.margin, "margin in bandwidth multiples");
    cmd->add_option("--fixed-h", o.fixed_h,
                    "also emit a fixed-bandwidth raster with this h (contrast mode)");
    cmd->add_option("--ppx-tol", o.ppx_tol, "beta search tolerance on ln-perplexity");
    cmd->add_option("--ppx-max-iters", o.ppx_max_iters, "beta search iteration cap");
    if (with_in) {
        cmd->add_option("--out", o.out, "output directory");
        cmd->add_option("--kernels", o.kernels, "auto | scalar | avx2")
            ->check(CLI::IsMember({"auto", "scalar", "avx2"}));
        cmd->add_option("--config", "plain key = value file merged under explicit flags");
    }
}

json echo_embed(const EmbedOpts& o) {
    json j;
    if (!o.in.empty()) j["in"] = o.in;
    if (!o.gen_gmm.empty()) j["gen-gmm"] = o.gen_gmm;
    j["format"] = o.format;
    if (o.distances) j["distances"] = true;
    if (o.header) j["header"] = true;
    if (o.whiten_dims) j["whiten"] = o.whiten_dims;
    j["ppx"] = o.ppx;
    j["threads"] = o.threads;
    j["layers"] = o.layers;
    j["rounds"] = o.rounds;
    j["seed"] = o.seed;
    if (o.epochs) j["epochs"] = o.epochs;
    if (o.iters) j["iters"] = o.iters;
    j["ppx-tol"] = o.ppx_tol;
    j["ppx-max-iters"] = o.ppx_max_iters;
    j["learning-n"] = o.learning_n;
    j["cores"] = o.cores;
    if (!o.labels.empty()) j["labels"] = o.labels;
    j["out"] = o.out;
    j["kernels"] = o.kernels;
    return j;
}

json echo_density(const DensityOpts& o, bool with_in) {
    json j;
    if (with_in) {
        j["in"] = o.in;
        j["out"] = o.out;
        j["kernels"] = o.kernels;
    }
    j["ppx"] = o.ppx;
    j["grid"] = o.grid;
    j["margin"] = o.margin;
    if (o.fixed_h > 0.0) j["fixed-h"] = o.fixed_h;
    j["ppx-tol"] = o.ppx_tol;
    j["ppx-max-iters"] = o.ppx_max_iters;
    return j;
}

void write_manifest(const fs::path& dir, const json& manifest) {
    std::ofstream out(dir / "manifest.json");
    if (!out) throw IoError((dir / "manifest.json").string() + ": cannot open");
    out << manifest.dump(2) << '\n';
}

PtsneConfig config_from(const EmbedOpts& o) {
    PtsneConfig config;
    config.threads = o.threads;
    config.layers = o.layers;
    config.rounds = o.rounds;
    config.ppx = o.ppx;
    config.seed = o.seed;
    if (o.epochs) config.epochs_override = o.epochs;
    if (o.iters) config.iters_override = o.iters;
    config.ppx_tol = o.ppx_tol;
    config.ppx_max_iters = o.ppx_max_iters;
    config.learning_rate_global_n = (o.learning_n == "global");
    config.cores = o.cores;
    return config;
}

// Returns the embedding CSV path for downstream stages.
std::string do_embed(const EmbedOpts& o, json& manifest,
                     const std::vector<int>* gen_labels,
                     const DataSource* pre_loaded) {
    StageClock clock(manifest["wall_clock_seconds"]["embed"]);
    fs::path dir(o.out);
    fs::create_directories(dir);

    DataSource source;
    std::vector<int> labels;
    const std::vector<int>* label_ptr = nullptr;
    if (pre_loaded) {
        source = *pre_loaded;
        label_ptr = gen_labels;
    } else if (!o.gen_gmm.empty()) {
        auto [src, lab] = generate_gmm(parse_gmm_spec(o.gen_gmm));
        source = std::move(src);
        labels = std::move(lab);
        label_ptr = &labels;
        io::write_csv_matrix(path_str(dir, "gmm_data.csv"), source.values, "");
        write_label_column(path_str(dir, "gmm_labels.csv"), labels);
        manifest["outputs"]["gmm_data"] = path_str(dir, "gmm_data.csv");
        manifest["outputs"]["gmm_labels"] = path_str(dir, "gmm_labels.csv");
        manifest["input_digest"] = fnv1a64_file(path_str(dir, "gmm_data.csv"));
    } else if (!o.in.empty()) {
        FileFormat fmt = (o.format == "csv") ? FileFormat::Csv : FileFormat::RawBin;
        source = load_matrix(o.in, fmt, o.distances, o.header);
        manifest["input_digest"] = fnv1a64_file(o.in);
    } else {
        throw ConfigError("embed needs --in or --gen-gmm");
    }
    if (!o.labels.empty()) {
        labels = io::read_labels_csv(o.labels);
        label_ptr = &labels;
    }
    if (o.whiten_dims) source = whiten(source, o.whiten_dims);
    if (label_ptr && label_ptr->size() != source.n())
        throw ShapeError("label count does not match point count");

    PtsneConfig config = config_from(o);
    validate_config(source.n(), config);

    std::string trace_path = path_str(dir, "trace.csv");
    std::ofstream trace(trace_path);
    if (!trace) throw IoError(trace_path + ": cannot open for writing");
    trace << "epoch,round,avg_cost,avg_size\n";
    GlobalState state = run_ptsne(
        source, config, [&](const TraceRecord& rec, const GlobalState&) {
            trace << rec.epoch << ',' << rec.round << ','
                  << io::format_double(rec.avg_cost) << ','
                  << io::format_double(rec.avg_size) << '\n';
            trace.flush();
        });
    if (state.degenerate_rows > 0)
        std::cerr << "warning: " << state.degenerate_rows
                  << " degenerate similarity rows degraded to uniform\n";

    Embedding mean = state.mean_positions();
    std::string emb_path = path_str(dir, "embedding.csv");
    io::write_embedding_csv(emb_path, mean);
    for (std::size_t l = 0; l < state.layers.size(); ++l) {
        std::string name = "layer_" + std::to_string(l + 1) + ".csv";
        io::write_embedding_csv((dir / name).string(), state.layers[l]);
    }
    svg::write_scatter(path_str(dir, "embedding.svg"), mean, label_ptr);
    svg::write_trace(path_str(dir, "trace.svg"), state.trace);

    manifest["outputs"]["embedding"] = emb_path;
    for (std::size_t l = 0; l < state.layers.size(); ++l)
        manifest["outputs"]["layer_" + std::to_string(l + 1)] =
            path_str(dir, ("layer_" + std::to_string(l + 1) + ".csv").c_str());
    manifest["outputs"]["scatter_svg"] = path_str(dir, "embedding.svg");
    manifest["outputs"]["trace_svg"] = path_str(dir, "trace.svg");
    manifest["trace"] = trace_path;
    return emb_path;
}

struct DensityPaths {
    std::string values;
    std::string geometry;
};

DensityPaths do_density(const DensityOpts& o, json& manifest) {
    StageClock clock(manifest["wall_clock_seconds"]["density"]);
    fs::path dir(o.out);
    fs::create_directories(dir);

    Embedding points = io::read_embedding_csv(o.in);
    PerplexityTarget target{o.ppx, o.ppx_tol, o.ppx_max_iters};
    KdeBandwidths bw = kde_bandwidths(points, target);
    if (bw.degenerate_rows > 0)
        std::cerr << "warning: " << bw.degenerate_rows
                  << " degenerate bandwidth rows fell back to the median\n";
    DensityRaster raster = estimate_density(points, bw, o.grid, o.margin);

    DensityPaths paths{path_str(dir, "raster_values.csv"),
                       path_str(dir, "raster_geometry.csv")};
    write_pgm16(path_str(dir, "raster.pgm"), raster);
    write_raster_values(paths.values, raster);
    write_raster_geometry(paths.geometry, raster);
    svg::write_heatmap(path_str(dir, "density.svg"), raster);
    std::cout << "total_mass=" << io::format_double(raster.sum()) << '\n';

    manifest["outputs"]["raster_pgm"] = path_str(dir, "raster.pgm");
    manifest["outputs"]["raster_values"] = paths.values;
    manifest["outputs"]["raster_geometry"] = paths.geometry;
    manifest["outputs"]["density_svg"] = path_str(dir, "density.svg");

    if (o.fixed_h > 0.0) {
        KdeBandwidths fixed = fixed_bandwidths(points.size(), o.fixed_h);
        DensityRaster fraster = estimate_density(points, fixed, o.grid, o.margin);
        write_pgm16(path_str(dir, "raster_fixed.pgm"), fraster);
        write_raster_values(path_str(dir, "raster_fixed_values.csv"), fraster);
        write_raster_geometry(path_str(dir, "raster_fixed_geometry.csv"), fraster);
        std::cout << "fixed_total_mass=" << io::format_double(fraster.sum())
                  << '\n';
        manifest["outputs"]["raster_fixed_pgm"] = path_str(dir, "raster_fixed.pgm");
        manifest["outputs"]["raster_fixed_values"] =
            path_str(dir, "raster_fixed_values.csv");
        manifest["outputs"]["raster_fixed_geometry"] =
            path_str(dir, "raster_fixed_geometry.csv");
    }
    return paths;
}

void do_cluster(const ClusterOpts& o, json& manifest) {
    StageClock clock(manifest["wall_clock_seconds"]["cluster"]);
    fs::path dir(o.out);
    fs::create_directories(dir);

    DensityRaster raster = read_raster(o.values, o.geometry);
    Segmentation seg = water_track(raster);

    write_labels_raster_csv(path_str(dir, "labels.csv"), seg);
    write_peaks_csv(path_str(dir, "peaks.csv"), seg);
    svg::write_overlay(path_str(dir, "overlay.svg"), raster, seg);
    manifest["outputs"]["labels"] = path_str(dir, "labels.csv");
    manifest["outputs"]["peaks"] = path_str(dir, "peaks.csv");
    manifest["outputs"]["overlay_svg"] = path_str(dir, "overlay.svg");

    if (!o.points.empty()) {
        Embedding points = io::read_embedding_csv(o.points);
        std::vector<int> labels = label_points(seg, raster, points);
        write_point_labels_csv(path_str(dir, "point_labels.csv"), labels);
        manifest["outputs"]["point_labels"] = path_str(dir, "point_labels.csv");
    }
    std::cout << "clusters=" << seg.clusters() << '\n';
}

void do_entropy(const EntropyOpts& o, json& manifest) {
    StageClock clock(manifest["wall_clock_seconds"]["entropy"]);
    fs::path dir(o.out);
    fs::create_directories(dir);

    auto table = normalized_entropy_experiment(parse_sizes(o.sizes), o.samples,
                                               o.seed);
    std::string csv_path = path_str(dir, "entropy.csv");
    std::ofstream out(csv_path);
    if (!out) throw IoError(csv_path + ": cannot open for writing");
    out << "size,mean_normalized_entropy\n";
    for (const auto& [size, mean] : table)
        out << size << ',' << io::format_double(mean) << '\n';
    out.close();
    svg::write_entropy(path_str(dir, "entropy.svg"), table);
    manifest["outputs"]["entropy_csv"] = csv_path;
    manifest["outputs"]["entropy_svg"] = path_str(dir, "entropy.svg");
}

// Plain "key = value" configuration merged under command-line flags: each
// entry becomes "--key value" after the subcommand token unless the flag was
// given explicitly. Values true/false toggle bare flags.
std::vector<std::string> merge_config_args(std::vector<std::string> args) {
    std::string path;
    std::vector<std::string> kept;
    for (std::size_t i = 0; i < args.size(); ++i) {
        const std::string& a = args[i];
        if (a == "--config") {
            if (i + 1 >= args.size())
                throw ConfigError("--config requires a file path");
            path = args[++i];
        } else if (a.rfind("--config=", 0) == 0) {
            path = a.substr(9);
        } else {
            kept.push_back(a);
        }
    }
    if (path.empty()) return kept;
    if (kept.empty() || kept.front().empty() || kept.front()[0] == '-')
        throw ConfigError("--config requires a subcommand");
    std::ifstream in(path);
    if (!in) throw IoError(path + ": cannot open");

    auto trim = [](std::string s) {
        std::size_t b = s.find_first_not_of(" \t\r");
        std::size_t e = s.find_last_not_of(" \t\r");
        return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
    };
    auto given = [&kept](const std::string& key) {
        std::string flag = "--" + key;
        for (const std::string& a : kept)
            if (a == flag || a.rfind(flag + "=", 0) == 0) return true;
        return false;
    };

    std::vector<std::string> extra;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        std::string t = trim(line);
        if (t.empty() || t[0] == '#' || t[0] == ';') continue;
        std::size_t eq = t.find('=');
        if (eq == std::string::npos)
            throw ConfigError(path + ":" + std::to_string(lineno) +
                              ": expected key = value");
        std::string key = trim(t.substr(0, eq));
        std::string value = trim(t.substr(eq + 1));
        if (key.empty())
            throw ConfigError(path + ":" + std::to_string(lineno) +
                              ": empty key");
        if (value.size() >= 2 && value.front() == '"' && value.back() == '"')
            value = value.substr(1, value.size() - 2);
        if (given(key)) continue;
        if (value == "true") {
            extra.push_back("--" + key);
        } else if (value == "false") {
            continue;
        } else {
            extra.push_back("--" + key);
            extra.push_back(value);
        }
    }

    std::vector<std::string> merged;
    merged.push_back(kept.front());
    merged.insert(merged.end(), extra.begin(), extra.end());
    merged.insert(merged.end(), kept.begin() + 1, kept.end());
    return merged;
}

std::vector<std::string> manifest_to_args(const json& manifest) {
    std::vector<std::string> args;
    args.push_back(manifest.at("command").get<std::string>());
    for (const auto& [key, value] : manifest.at("flags").items()) {
        if (value.is_boolean()) {
            if (value.get<bool>()) args.push_back("--" + key);
            continue;
        }
        args.push_back("--" + key);
        if (value.is_string()) {
            args.push_back(value.get<std::string>());
        } else {
            args.push_back(value.dump());
        }
    }
    return args;
}

int run(int argc, char** argv);

int replay_manifest(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError(path + ": cannot open");
    json manifest;
    try {
        manifest = json::parse(in);
    } catch (const json::exception& e) {
        throw ParseError(path + ": " + e.what());
    }
    if (!manifest.contains("command") || !manifest.contains("flags"))
        throw ParseError(path + ": manifest lacks command/flags");
    std::vector<std::string> args = manifest_to_args(manifest);
    std::vector<char*> argv;
    std::string arg0 = "watermap";
    argv.push_back(arg0.data());
    for (auto& a : args) argv.push_back(a.data());
    return run(static_cast<int>(argv.size()), argv.data());
}

int run(int argc, char** argv) {
    std::vector<std::string> merged =
        merge_config_args({argv + 1, argv + argc});
    std::vector<char*> merged_argv;
    merged_argv.push_back(argv[0]);
    for (auto& a : merged) merged_argv.push_back(a.data());
    argc = static_cast<int>(merged_argv.size());
    argv = merged_argv.data();

    CLI::App app{"embedding, density and cluster mapping pipeline"};
    app.require_subcommand(0, 1);

    std::string from_manifest;
    app.add_option("--from-manifest", from_manifest,
                   "replay a run from its manifest");

    EmbedOpts eo;
    DensityOpts dno;
    ClusterOpts co;
    EntropyOpts eno;

    CLI::App* embed = app.add_subcommand("embed", "map a dataset to 2-D");
    add_embed_flags(embed, eo);

    CLI::App* density =
        app.add_subcommand("density", "adaptive density raster of an embedding");
    add_density_flags(density, dno, true);

    CLI::App* cluster = app.add_subcommand("cluster", "segment a density raster");
    cluster->add_option("--values", co.values, "raster values CSV")->required();
    cluster->add_option("--geometry", co.geometry, "raster geometry CSV")->required();
    cluster->add_option("--points", co.points, "embedding CSV to label per point");
    cluster->add_option("--out", co.out, "output directory");
    cluster->add_option("--config", "plain key = value file merged under explicit flags");

    CLI::App* entropy =
        app.add_subcommand("entropy-demo", "normalized entropy vs neighborhood size");
    entropy->add_option("--sizes", eno.sizes, "comma-separated neighborhood sizes");
    entropy->add_option("--samples", eno.samples, "samples per size");
    entropy->add_option("--seed", eno.seed, "RNG seed");
    entropy->add_option("--out", eno.out, "output directory");
    entropy->add_option("--config", "plain key = value file merged under explicit flags");

    EmbedOpts po;
    DensityOpts pdo;
    CLI::App* pipeline =
        app.add_subcommand("pipeline", "embed, density and cluster in one run");
    add_embed_flags(pipeline, po);
    double density_ppx = -1.0;
    pipeline->add_option("--density-ppx", density_ppx,
                         "density perplexity (default: same as --ppx)");
    pipeline->add_option("--grid", pdo.grid, "grid cells per axis");
    pipeline->add_option("--margin", pdo.margin, "margin in bandwidth multiples");
    pipeline->add_option("--fixed-h", pdo.fixed_h,
                         "also emit a fixed-bandwidth raster with this h");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return 2;
    }

    if (!from_manifest.empty()) return replay_manifest(from_manifest);
    if (app.get_subcommands().empty()) {
        std::cerr << "config error: a subcommand is required (see --help)\n";
        return 2;
    }

    if (embed->parsed()) {
        kern::select(parse_backend(eo.kernels));
        json manifest;
        manifest["tool"] = "watermap";
        manifest["version"] = kVersion;
        manifest["command"] = "embed";
        manifest["flags"] = echo_embed(eo);
        do_embed(eo, manifest, nullptr, nullptr);
        write_manifest(fs::path(eo.out), manifest);
    } else if (density->parsed()) {
        kern::select(parse_backend(dno.kernels));
        json manifest;
        manifest["tool"] = "watermap";
        manifest["version"] = kVersion;
        manifest["command"] = "density";
        manifest["flags"] = echo_density(dno, true);
        manifest["input_digest"] = fnv1a64_file(dno.in);
        do_density(dno, manifest);
        write_manifest(fs::path(dno.out), manifest);
    } else if (cluster->parsed()) {
        json manifest;
        manifest["tool"] = "watermap";
        manifest["version"] = kVersion;
        manifest["command"] = "cluster";
        json flags;
        flags["values"] = co.values;
        flags["geometry"] = co.geometry;
        if (!co.points.empty()) flags["points"] = co.points;
        flags["out"] = co.out;
        manifest["flags"] = flags;
        manifest["input_digest"] = fnv1a64_file(co.values);
        do_cluster(co, manifest);
        write_manifest(fs::path(co.out), manifest);
    } else if (entropy->parsed()) {
        json manifest;
        manifest["tool"] = "watermap";
        manifest["version"] = kVersion;
        manifest["command"] = "entropy-demo";
        json flags;
        flags["sizes"] = eno.sizes;
        flags["samples"] = eno.samples;
        flags["seed"] = eno.seed;
        flags["out"] = eno.out;
        manifest["flags"] = flags;
        do_entropy(eno, manifest);
        write_manifest(fs::path(eno.out), manifest);
    } else if (pipeline->parsed()) {
        kern::select(parse_backend(po.kernels));
        json manifest;
        manifest["tool"] = "watermap";
        manifest["version"] = kVersion;
        manifest["command"] = "pipeline";
        json flags = echo_embed(po);
        if (density_ppx > 0.0) flags["density-ppx"] = density_ppx;
        flags["grid"] = pdo.grid;
        flags["margin"] = pdo.margin;
        if (pdo.fixed_h > 0.0) flags["fixed-h"] = pdo.fixed_h;
        manifest["flags"] = flags;

        std::string emb_path = do_embed(po, manifest, nullptr, nullptr);
        pdo.in = emb_path;
        pdo.ppx = (density_ppx > 0.0) ? density_ppx : po.ppx;
        pdo.ppx_tol = po.ppx_tol;
        pdo.ppx_max_iters = po.ppx_max_iters;
        pdo.out = po.out;
        pdo.kernels = po.kernels;
        DensityPaths paths = do_density(pdo, manifest);

        ClusterOpts pco;
        pco.values = paths.values;
        pco.geometry = paths.geometry;
        pco.points = emb_path;
        pco.out = po.out;
        do_cluster(pco, manifest);
        write_manifest(fs::path(po.out), manifest);
    }
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    try {
        return run(argc, argv);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return 2;
    } catch (const NumericError& e) {
        std::cerr << "numerical error: " << e.what() << '\n';
        return 4;
    } catch (const DataError& e) {
        std::cerr << "data error: " << e.what() << '\n';
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 3;
    }
}
