// echorec: multi-echo MRI reconstruction experiments from the command line.
//
// Subcommands: phantom, mask, undersample, recon, eval, rerun. Every command
// is a pure function of its flags plus input files; a JSON manifest written
// next to each output records the exact invocation so runs can be reproduced
// byte for byte with `echorec rerun`.

#include <CLI11.hpp>
#include <json.hpp>

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "echorec/echorec.hpp"

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;
using namespace echorec;

namespace {

constexpr int kExitValidation = 2;
constexpr int kExitRuntime = 3;
constexpr int kExitIo = 4;

struct Timer {
  std::chrono::steady_clock::time_point t0 = std::chrono::steady_clock::now();
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  }
};

void write_manifest(const std::string& out_path, const json& manifest) {
  std::ofstream out(out_path, std::ios::binary | std::ios::trunc);
  if (!out) throw io_error(io_error::Kind::BadHeader, "cannot write manifest: " + out_path);
  out << manifest.dump(2) << '\n';
}

json base_manifest(const std::string& command, const std::vector<std::string>& argv) {
  json m;
  m["command"] = command;
  m["argv"] = argv;
  m["version"] = kVersion;
  return m;
}

std::string csv_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6f", v);
  return buf;
}

json config_json(const SolverConfig& cfg) {
  json j;
  j["lambda"] = cfg.lambda;
  j["gamma"] = cfg.gamma;
  j["mu1"] = cfg.mu1;
  j["mu2"] = cfg.mu2;
  j["layers"] = cfg.layers;
  j["regularizer"] = cfg.regularizer == Regularizer::RowSparse ? "row_sparse" : "low_rank";
  j["patch_size"] = cfg.patch.patch_size;
  j["stride"] = cfg.patch.stride;
  j["boundary"] = cfg.patch.boundary == Boundary::Wraparound ? "wraparound" : "interior-only";
  j["outer_iters"] = cfg.outer_iters;
  j["tol"] = cfg.tol;
  j["ista_iters"] = cfg.ista_iters;
  j["seed"] = cfg.seed;
  return j;
}

int run_cli(const std::vector<std::string>& args, int depth);

// --- phantom ---------------------------------------------------------------

void add_phantom(CLI::App& app, const std::vector<std::string>& argv) {
  auto* cmd = app.add_subcommand("phantom", "Generate a synthetic multi-echo phantom");
  auto size = std::make_shared<int>(256);
  auto echoes = std::make_shared<int>(8);
  auto spacing = std::make_shared<double>(6.738);
  auto seed = std::make_shared<std::uint64_t>(0);
  auto out = std::make_shared<std::string>();
  cmd->add_option("--size", *size, "Image side in pixels")->capture_default_str();
  cmd->add_option("--echoes", *echoes, "Number of echoes")->capture_default_str();
  cmd->add_option("--spacing", *spacing, "Echo spacing in ms")->capture_default_str();
  cmd->add_option("--seed", *seed, "RNG seed (required for reproducibility)")->required();
  cmd->add_option("-o,--output", *out, "Output images file")->required();

  cmd->callback([=]() {
    Timer timer;
    const PhantomSpec spec = default_phantom_spec(*size, *echoes, *seed);
    PhantomSpec s = spec;
    s.echo_spacing_ms = *spacing;
    const EchoStack x = make_phantom(s);
    save(*out, x);

    json m = base_manifest("phantom", argv);
    m["spec"] = {{"size", *size},
                 {"echoes", *echoes},
                 {"echo_spacing_ms", *spacing},
                 {"regions", s.regions.size()},
                 {"seed", *seed}};
    m["outputs"] = {{"images", *out}};
    m["wall_time_s"] = timer.seconds();
    write_manifest(*out + ".manifest.json", m);
    std::printf("phantom: %dx%d, %d echoes, seed %llu -> %s\n", *size, *size, *echoes,
                static_cast<unsigned long long>(*seed), out->c_str());
  });
}

// --- mask ------------------------------------------------------------------

void add_mask(CLI::App& app, const std::vector<std::string>& argv) {
  auto* cmd = app.add_subcommand("mask", "Generate a phase-encode sampling mask");
  auto size = std::make_shared<int>(256);
  auto lines = std::make_shared<int>(0);
  auto accel = std::make_shared<int>(0);
  auto cf = std::make_shared<double>(0.33);
  auto seed = std::make_shared<std::uint64_t>(0);
  auto out = std::make_shared<std::string>();
  cmd->add_option("--size", *size, "Image side in pixels")->capture_default_str();
  cmd->add_option("--lines", *lines, "Number of phase-encode lines");
  cmd->add_option("--accel", *accel, "Acceleration factor (lines = size / accel)");
  cmd->add_option("--center-fraction", *cf, "Fraction of lines in the centre block")
      ->capture_default_str();
  cmd->add_option("--seed", *seed, "RNG seed")->required();
  cmd->add_option("-o,--output", *out, "Output mask file")->required();

  cmd->callback([=]() {
    Timer timer;
    int n_lines = *lines;
    if (n_lines == 0) {
      if (*accel <= 0) throw validation_error("mask: give --lines or --accel");
      n_lines = *size / *accel;
    }
    const SamplingMask m = make_mask(*size, *size, n_lines, *cf, *seed);
    save(*out, m);

    json man = base_manifest("mask", argv);
    man["mask"] = {{"height", *size},
                   {"width", *size},
                   {"lines", n_lines},
                   {"center_fraction", *cf},
                   {"seed", *seed}};
    man["outputs"] = {{"mask", *out}};
    man["wall_time_s"] = timer.seconds();
    write_manifest(*out + ".manifest.json", man);
    std::printf("mask: %d/%d lines (centre %d) -> %s\n", n_lines, *size,
                center_line_count(n_lines, *cf), out->c_str());
  });
}

// --- undersample -------------------------------------------------------

void add_undersample(CLI::App& app, const std::vector<std::string>& argv) {
  auto* cmd =
      app.add_subcommand("undersample", "Apply per-echo undersampling to a phantom");
  auto input = std::make_shared<std::string>();
  auto lines = std::make_shared<int>(0);
  auto accel = std::make_shared<int>(0);
  auto cf = std::make_shared<double>(0.33);
  auto sigma = std::make_shared<double>(0.0);
  auto seed = std::make_shared<std::uint64_t>(0);
  auto out = std::make_shared<std::string>();
  cmd->add_option("--input", *input, "Ground-truth images file")->required();
  cmd->add_option("--lines", *lines, "Phase-encode lines per echo");
  cmd->add_option("--accel", *accel, "Acceleration factor (lines = height / accel)");
  cmd->add_option("--center-fraction", *cf, "Fraction of lines in the centre block")
      ->capture_default_str();
  cmd->add_option("--noise-sigma", *sigma, "Complex Gaussian noise sigma")
      ->capture_default_str();
  cmd->add_option("--seed", *seed, "Base seed; echo j uses seed ^ j")->required();
  cmd->add_option("-o,--output", *out, "Output kspace file")->required();

  cmd->callback([=]() {
    Timer timer;
    const EchoStack x = load_images(*input);
    int n_lines = *lines;
    if (n_lines == 0) {
      if (*accel <= 0) throw validation_error("undersample: give --lines or --accel");
      n_lines = x.height / *accel;
    }
    const auto masks = make_echo_masks(x.height, x.width, x.n_echoes(), n_lines, *cf, *seed);
    const AcquiredData d = forward(x, masks, *sigma, *seed);
    save(*out, d);

    json m = base_manifest("undersample", argv);
    m["inputs"] = {{"images", *input}};
    m["acquisition"] = {{"lines", n_lines},
                        {"center_fraction", *cf},
                        {"noise_sigma", *sigma},
                        {"base_seed", *seed},
                        {"echoes", x.n_echoes()}};
    m["outputs"] = {{"kspace", *out}};
    m["wall_time_s"] = timer.seconds();
    write_manifest(*out + ".manifest.json", m);
    std::printf("undersample: %d lines/echo x %d echoes -> %s\n", n_lines, x.n_echoes(),
                out->c_str());
  });
}

// --- recon -------------------------------------------------------------

void add_recon(CLI::App& app, const std::vector<std::string>& argv) {
  auto* cmd = app.add_subcommand("recon", "Reconstruct an undersampled acquisition");
  auto input = std::make_shared<std::string>();
  auto method = std::make_shared<std::string>();
  auto layers = std::make_shared<int>(0);
  auto lambda = std::make_shared<double>(0.1);
  auto gamma = std::make_shared<double>(-1.0);
  auto truth_path = std::make_shared<std::string>();
  auto out = std::make_shared<std::string>();
  auto seed = std::make_shared<std::uint64_t>(0);
  auto patch = std::make_shared<int>(12);
  auto stride = std::make_shared<int>(1);
  auto outer = std::make_shared<int>(50);
  auto ista = std::make_shared<int>(30);
  auto tol = std::make_shared<double>(1e-4);
  auto tune = std::make_shared<bool>(false);
  auto tune_lambdas = std::make_shared<std::vector<double>>();
  auto tune_gammas = std::make_shared<std::vector<double>>();
  cmd->add_option("--input", *input, "Kspace file")->required();
  cmd->add_option("--method", *method, "rsddl | lrddl | shallow-dl | zero-fill")->required();
  cmd->add_option("--layers", *layers, "Dictionary layers (2-4, deep methods only)");
  cmd->add_option("--lambda", *lambda, "Data/dictionary balance")->capture_default_str();
  cmd->add_option("--gamma", *gamma, "Sparsity/rank weight (or use --tune)");
  cmd->add_option("--truth", *truth_path, "Ground-truth images file for SNR");
  cmd->add_option("--seed", *seed, "Solver seed")->required();
  cmd->add_option("--patch", *patch, "Patch size")->capture_default_str();
  cmd->add_option("--stride", *stride, "Patch stride")->capture_default_str();
  cmd->add_option("--outer-iters", *outer, "Outer sweep budget")->capture_default_str();
  cmd->add_option("--ista-iters", *ista, "Inner proximal-gradient budget")
      ->capture_default_str();
  cmd->add_option("--tol", *tol, "Relative objective-change stop")->capture_default_str();
  cmd->add_flag("--tune", *tune, "Pick lambda/gamma by greedy L-curve before solving");
  cmd->add_option("--tune-lambdas", *tune_lambdas, "Lambda grid for --tune");
  cmd->add_option("--tune-gammas", *tune_gammas, "Gamma grid for --tune");
  cmd->add_option("-o,--output", *out, "Output images file")->required();

  cmd->callback([=]() {
    Timer timer;
    const bool deep = *method == "rsddl" || *method == "lrddl";
    const bool dl = deep || *method == "shallow-dl";
    if (!dl && *method != "zero-fill")
      throw validation_error("recon: unknown method '" + *method + "'");
    if (!deep && *layers != 0)
      throw validation_error("recon: --layers applies to rsddl/lrddl only");
    if (deep && (*layers < 2 || *layers > 4))
      throw validation_error("recon: deep methods need --layers in {2, 3, 4}");

    const AcquiredData d = load_kspace(*input);
    EchoStack truth;
    const bool have_truth = !truth_path->empty();
    if (have_truth) truth = load_images(*truth_path);

    json m = base_manifest("recon", argv);
    m["inputs"] = {{"kspace", *input}};
    if (have_truth) m["inputs"]["truth"] = *truth_path;
    m["method"] = *method;
    m["layers"] = deep ? *layers : (*method == "shallow-dl" ? 1 : 0);
    m["lines"] = d.echoes.front().mask.n_lines();

    EchoStack recon;
    if (*method == "zero-fill") {
      recon = adjoint(d);
    } else {
      SolverConfig cfg;
      cfg.lambda = *lambda;
      cfg.layers = deep ? *layers : 1;
      cfg.regularizer = *method == "lrddl" ? Regularizer::LowRank : Regularizer::RowSparse;
      cfg.patch.patch_size = *patch;
      cfg.patch.stride = *stride;
      cfg.outer_iters = *outer;
      cfg.ista_iters = *ista;
      cfg.tol = *tol;
      cfg.seed = *seed;
      if (*tune) {
        TuneGrid grid;
        grid.lambda_values = tune_lambdas->empty()
                                 ? std::vector<double>{0.01, 0.03, 0.1, 0.3, 1.0}
                                 : *tune_lambdas;
        grid.gamma_values = tune_gammas->empty()
                                ? std::vector<double>{0.003, 0.01, 0.03, 0.1, 0.3}
                                : *tune_gammas;
        grid.fixed = cfg;
        TuneReport treport;
        cfg = lcurve_tune(grid, d, &treport);
        std::fputs(treport.table().c_str(), stdout);
      } else {
        if (*gamma < 0.0)
          throw validation_error("recon: give --gamma or --tune for dictionary methods");
        cfg.gamma = *gamma;
      }
      auto [xs, report] =
          *method == "shallow-dl"
              ? solve_shallow(d, cfg, have_truth ? &truth : nullptr)
              : solve(d, cfg, have_truth ? &truth : nullptr);
      recon = std::move(xs);

      json rj;
      rj["initial_objective"] = report.initial_objective;
      rj["objective_trace"] = report.objective_trace;
      rj["iterations_run"] = report.iterations_run;
      rj["wall_time_s"] = report.wall_time_s;
      if (report.final_snr_db) rj["final_snr_db"] = *report.final_snr_db;
      std::ofstream rout(*out + ".report.json", std::ios::binary | std::ios::trunc);
      rout << rj.dump(2) << '\n';
      m["config"] = config_json(cfg);
    }
    save(*out, recon);
    if (have_truth) {
      const double snr = snr_db(recon, truth);
      m["metrics"] = {{"snr_db", snr}};
      std::printf("recon %s: SNR %.2f dB\n", method->c_str(), snr);
    }
    m["outputs"] = {{"images", *out}};
    m["wall_time_s"] = timer.seconds();
    write_manifest(*out + ".manifest.json", m);
    std::printf("recon %s -> %s\n", method->c_str(), out->c_str());
  });
}

// --- eval --------------------------------------------------------------

void add_eval(CLI::App& app, const std::vector<std::string>& argv) {
  auto* cmd = app.add_subcommand("eval", "SNR table, reconstruction and difference PNGs");
  auto truth_path = std::make_shared<std::string>();
  auto recons = std::make_shared<std::vector<std::string>>();
  auto out_dir = std::make_shared<std::string>(".");
  auto csv_path = std::make_shared<std::string>();
  cmd->add_option("--truth", *truth_path, "Ground-truth images file")->required();
  cmd->add_option("--recon", *recons, "Reconstruction images file (repeatable)")->required();
  cmd->add_option("--out-dir", *out_dir, "Directory for PNG output")->capture_default_str();
  cmd->add_option("--csv", *csv_path, "CSV report path (default <out-dir>/snr.csv)");

  cmd->callback([=]() {
    Timer timer;
    const EchoStack truth = load_images(*truth_path);
    fs::create_directories(*out_dir);
    const std::string csv_file =
        csv_path->empty() ? (fs::path(*out_dir) / "snr.csv").string() : *csv_path;

    std::string csv = "method,layers,lines,snr_db\n";
    std::printf("%-12s %7s %6s %10s\n", "method", "layers", "lines", "snr_db");
    json m = base_manifest("eval", argv);
    m["inputs"] = {{"truth", *truth_path}, {"recons", *recons}};
    json rows = json::array();

    for (const std::string& rpath : *recons) {
      const EchoStack recon = load_images(rpath);
      const double snr = snr_db(recon, truth);

      std::string method = "unknown";
      int layers = 0, lines = 0;
      const std::string man_path = rpath + ".manifest.json";
      if (fs::exists(man_path)) {
        std::ifstream in(man_path);
        json rm = json::parse(in, nullptr, false);
        if (!rm.is_discarded()) {
          method = rm.value("method", "unknown");
          layers = rm.value("layers", 0);
          lines = rm.value("lines", 0);
        }
      }
      csv += method + "," + std::to_string(layers) + "," + std::to_string(lines) + "," +
             csv_double(snr) + "\n";
      std::printf("%-12s %7d %6d %10.2f\n", method.c_str(), layers, lines, snr);
      rows.push_back({{"recon", rpath},
                      {"method", method},
                      {"layers", layers},
                      {"lines", lines},
                      {"snr_db", snr}});

      const std::string stem = fs::path(rpath).stem().string();
      for (int j = 0; j < truth.n_echoes(); ++j) {
        const MatrixXd mag = magnitude_image(recon, j);
        export_png(mag, (fs::path(*out_dir) / (stem + "_echo" + std::to_string(j) + ".png"))
                            .string());
        // Difference maps share the ground-truth window so darkness is
        // comparable across methods.
        const MatrixXd diff = difference_image(recon, truth, j);
        const double tmax = magnitude_image(truth, j).maxCoeff();
        export_png(diff,
                   (fs::path(*out_dir) / (stem + "_diff_echo" + std::to_string(j) + ".png"))
                       .string(),
                   std::make_pair(0.0, tmax));
      }
    }
    std::ofstream cout_(csv_file, std::ios::binary | std::ios::trunc);
    if (!cout_) throw io_error(io_error::Kind::BadHeader, "cannot write CSV: " + csv_file);
    cout_ << csv;

    m["rows"] = rows;
    m["outputs"] = {{"csv", csv_file}, {"png_dir", *out_dir}};
    m["wall_time_s"] = timer.seconds();
    write_manifest(csv_file + ".manifest.json", m);
  });
}

// --- rerun -------------------------------------------------------------

void add_rerun(CLI::App& app, int depth) {
  auto* cmd = app.add_subcommand("rerun", "Re-execute the command recorded in a manifest");
  auto manifest = std::make_shared<std::string>();
  cmd->add_option("--manifest", *manifest, "Manifest JSON written by a previous run")
      ->required();
  cmd->callback([manifest, depth]() {
    if (depth > 0) throw validation_error("rerun: manifests of rerun itself are not replayed");
    std::ifstream in(*manifest);
    if (!in) throw io_error(io_error::Kind::BadHeader, "cannot open manifest: " + *manifest);
    json m = json::parse(in, nullptr, false);
    if (m.is_discarded() || !m.contains("argv"))
      throw io_error(io_error::Kind::BadHeader, "malformed manifest: " + *manifest);
    const std::vector<std::string> argv = m["argv"].get<std::vector<std::string>>();
    const int rc = run_cli(argv, depth + 1);
    if (rc != 0) throw solver_error("rerun: replayed command failed");
  });
}

int run_cli(const std::vector<std::string>& args, int depth) {
  CLI::App app{"echorec: multi-echo MRI reconstruction toolkit"};
  app.require_subcommand(1);
  add_phantom(app, args);
  add_mask(app, args);
  add_undersample(app, args);
  add_recon(app, args);
  add_eval(app, args);
  add_rerun(app, depth);

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return e.get_exit_code() == 0 ? 0 : kExitValidation;
  } catch (const validation_error& e) {
    std::fprintf(stderr, "error (validation): %s\n", e.what());
    return kExitValidation;
  } catch (const io_error& e) {
    std::fprintf(stderr, "error (io): %s\n", e.what());
    return kExitIo;
  } catch (const solver_error& e) {
    std::fprintf(stderr, "error (runtime): %s\n", e.what());
    return kExitRuntime;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitRuntime;
  }
  return 0;
}

} // namespace

int main(int argc, char** argv) {
  std::vector<std::string> args;
  for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
  return run_cli(args, 0);
}
