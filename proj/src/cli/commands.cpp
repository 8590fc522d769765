#include "peit/cli.hpp"

#include <atomic>
#include <cmath>
#include <cstdint>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <mutex>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>

#include "peit/config.hpp"
#include "peit/cooling.hpp"
#include "peit/csv.hpp"
#include "peit/errors.hpp"
#include "peit/ion_chain.hpp"
#include "peit/rates.hpp"
#include "peit/thermometry.hpp"
#include "peit/units.hpp"

#include "presets_generated.hpp"

namespace peit {
namespace {

namespace fs = std::filesystem;

struct CliArgs {
  std::string config_path;
  std::string preset;
  std::string out_dir = ".";
  int threads = 1;
  // thermo-only trace mode
  std::string trace_blue;
  std::string trace_red;
  double factor = 0.0;
  double nu_min = 0.0; // rad/us; 0 = derive from the trace window
  double nu_max = 0.0;
  int nu_points = 1500;
};

std::string now_utc() {
  std::time_t t = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

// run fn(0..n-1) on up to `threads` workers; results must go to per-index
// slots so the output order never depends on scheduling
void parallel_for(int n, int threads, const std::function<void(int)>& fn) {
  threads = std::max(1, std::min(threads, n));
  if (threads == 1) {
    for (int i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<int> next{0};
  std::exception_ptr first_error;
  std::mutex error_mutex;
  std::vector<std::thread> pool;
  for (int w = 0; w < threads; ++w)
    pool.emplace_back([&] {
      for (int i; (i = next.fetch_add(1)) < n;) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(error_mutex);
          if (!first_error) first_error = std::current_exception();
        }
      }
    });
  for (auto& th : pool) th.join();
  if (first_error) std::rethrow_exception(first_error);
}

void write_bundle(const CliArgs& args, const std::string& stem,
                  const std::string& csv, json meta) {
  fs::create_directories(args.out_dir);
  const fs::path csv_path = fs::path(args.out_dir) / (stem + ".csv");
  const fs::path json_path = fs::path(args.out_dir) / (stem + ".json");
  {
    std::ofstream f(csv_path, std::ios::binary);
    if (!f) throw ConfigError("cannot write " + csv_path.string());
    f << csv;
  }
  meta["timestamp_utc"] = now_utc();
  {
    std::ofstream f(json_path, std::ios::binary);
    if (!f) throw ConfigError("cannot write " + json_path.string());
    f << meta.dump(2) << '\n';
  }
  std::cout << "wrote " << csv_path.string() << " and " << json_path.string()
            << "\n";
}

json load_config(const CliArgs& args, const std::string& command) {
  if (!args.config_path.empty() && !args.preset.empty())
    throw ConfigError("give either --config or --preset, not both");
  std::string text;
  if (!args.preset.empty()) {
    bool found = false;
    for (const auto& [name, body] : presets::table)
      if (name == args.preset) {
        text = body;
        found = true;
        break;
      }
    if (!found) {
      std::string known;
      for (const auto& [name, body] : presets::table)
        known += " " + std::string(name);
      throw ConfigError("unknown preset '" + args.preset + "'; available:" +
                        known);
    }
  } else if (!args.config_path.empty()) {
    std::ifstream f(args.config_path);
    if (!f) throw ConfigError("cannot read " + args.config_path);
    std::stringstream ss;
    ss << f.rdbuf();
    text = ss.str();
  } else {
    throw ConfigError("missing --config <path> or --preset <name>");
  }

  json cfg;
  try {
    cfg = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  if (cfg.contains("command") && cfg["command"] != command)
    throw ConfigError("config is for command '" +
                      cfg["command"].get<std::string>() + "', not '" +
                      command + "'");
  return cfg;
}

std::string output_stem(const CliArgs& args, const std::string& fallback) {
  if (!args.preset.empty()) return args.preset;
  if (!args.config_path.empty()) return fs::path(args.config_path).stem();
  return fallback;
}

const char* mode_label(const Eigen::VectorXd& b) {
  int changes = 0;
  for (int i = 1; i < b.size(); ++i)
    if (b(i) * b(i - 1) < 0.0) ++changes;
  static const char* names[] = {"com", "tilt", "quad", "zigzag"};
  return changes < 4 ? names[changes] : "higher";
}

// ---------------------------------------------------------------- modes

int cmd_modes(const CliArgs& args) {
  ConfigReader cfg(load_config(args, "modes"));
  cfg.text_or("command", "modes");

  ChainConfig chain;
  chain.ion_count = cfg.integer("ions");
  chain.omega_z = cfg.angular("omega_z");
  chain.omega_x = cfg.angular_or("omega_x", 0.0);
  chain.omega_y = cfg.angular_or("omega_y", 0.0);
  const double wavelength = cfg.number_or("wavelength_nm", ca40_wavelength_nm);
  const double angle_deg = cfg.number_or("beam_angle_deg", 45.0);
  const double mass_u = cfg.number_or("mass_u", ca40_mass_si / amu_si);
  chain.mass_kg = mass_u * amu_si;
  cfg.finish();

  const double k_proj =
      wavevector_rad_um(wavelength) * std::cos(angle_deg * pi / 180.0);

  std::vector<ModeStructure> branches;
  branches.push_back(axial_modes(chain));
  if (chain.omega_x > 0.0)
    branches.push_back(transverse_modes(chain, Axis::x));
  if (chain.omega_y > 0.0)
    branches.push_back(transverse_modes(chain, Axis::y));

  const int n = chain.ion_count;
  std::vector<std::string> header = {"branch", "mode_index", "label",
                                     "freq_mhz"};
  for (int j = 1; j <= n; ++j) header.push_back("b_" + std::to_string(j));
  for (int j = 1; j <= n; ++j) header.push_back("eta_" + std::to_string(j));
  CsvBuilder csv(header);

  for (const ModeStructure& m : branches) {
    const Eigen::MatrixXd eta = lamb_dicke_factors(m, k_proj, chain.mass_kg);
    for (int k = 0; k < n; ++k) {
      std::vector<std::string> row = {axis_name(m.branch), std::to_string(k),
                                      mode_label(m.eigenvectors.col(k)),
                                      csv_double(rad_us_to_mhz(m.frequencies[k]))};
      for (int j = 0; j < n; ++j)
        row.push_back(csv_double(m.eigenvectors(j, k)));
      for (int j = 0; j < n; ++j) row.push_back(csv_double(eta(j, k)));
      csv.add_row(row);
    }
  }

  const EquilibriumSolution eq = equilibrium_positions(chain);
  json positions = json::array();
  for (double u : eq.positions) positions.push_back(u * eq.length_scale_um);

  json meta;
  meta["command"] = "modes";
  meta["config"] = {{"command", "modes"},
                    {"ions", chain.ion_count},
                    {"omega_z_rad_us", chain.omega_z},
                    {"omega_x_rad_us", chain.omega_x},
                    {"omega_y_rad_us", chain.omega_y},
                    {"wavelength_nm", wavelength},
                    {"beam_angle_deg", angle_deg},
                    {"mass_u", mass_u}};
  meta["equilibrium"] = {{"positions_um", positions},
                         {"length_scale_um", eq.length_scale_um},
                         {"force_residual", eq.residual}};
  meta["accuracy"] = {{"note", "dense symmetric eigensolver; exact to "
                               "machine precision"}};
  write_bundle(args, output_stem(args, "modes"), csv.text(), meta);
  return 0;
}

// -------------------------------------------------------------- profile

int cmd_profile(const CliArgs& args) {
  ConfigReader cfg(load_config(args, "profile"));
  cfg.text_or("command", "profile");

  LaserTone driving;
  driving.detuning = cfg.angular("driving_detuning");
  const bool has_rabi =
      cfg.has("driving_rabi_mhz") || cfg.has("driving_rabi_rad_us");
  const bool has_stark =
      cfg.has("driving_stark_mhz") || cfg.has("driving_stark_rad_us");
  if (has_rabi == has_stark)
    throw ConfigError(
        "give exactly one of driving_rabi_* and driving_stark_*");
  driving.rabi = has_rabi ? cfg.angular("driving_rabi")
                          : driving_rabi_for_stark(cfg.angular("driving_stark"),
                                                   driving.detuning);

  AtomParams atom = AtomParams::balanced(cfg.angular("gamma"));
  if (cfg.has("gamma_g_mhz") || cfg.has("gamma_g_rad_us"))
    atom.gamma_g = cfg.angular("gamma_g");
  if (cfg.has("gamma_r_mhz") || cfg.has("gamma_r_rad_us"))
    atom.gamma_r = cfg.angular("gamma_r");

  const double probe_rabi = cfg.angular("probe_rabi");
  const double g_min = cfg.angular("grid_min");
  const double g_max = cfg.angular("grid_max");
  const double g_step = cfg.angular("grid_step");
  if (g_step <= 0.0 || g_max <= g_min)
    throw ConfigError("profile grid must have grid_min < grid_max, step > 0");

  // probe tones: one scattering column each; no tones -> one plain column
  struct Tone {
    double mode = 0.0;
    double rabi = 0.0;
  };
  std::vector<Tone> tones;
  if (cfg.has("tones")) {
    json list = cfg.child("tones");
    if (!list.is_array()) throw ConfigError("tones must be an array");
    for (size_t i = 0; i < list.size(); ++i) {
      ConfigReader tr(list[i], "tones[" + std::to_string(i) + "]");
      Tone t;
      t.mode = tr.angular("mode");
      t.rabi = tr.angular_or("rabi", probe_rabi);
      tr.finish();
      tones.push_back(t);
    }
  }
  cfg.finish();

  const int n_points =
      static_cast<int>(std::round((g_max - g_min) / g_step)) + 1;
  std::vector<double> grid(n_points);
  for (int i = 0; i < n_points; ++i) grid[i] = g_min + i * g_step;

  const double delta_ac = ac_stark_shift(driving);
  const int n_cols = tones.empty() ? 1 : static_cast<int>(tones.size());
  auto column_rabi = [&](int c) {
    return tones.empty() ? probe_rabi : tones[c].rabi;
  };

  // marker rows: the EIT null, the dressed resonance, and each tone's
  // red-sideband position
  std::vector<std::pair<std::string, double>> markers = {
      {"eit-null", driving.detuning},
      {"dressed-peak", driving.detuning + delta_ac}};
  for (size_t l = 0; l < tones.size(); ++l)
    markers.push_back(
        {"tone-" + std::to_string(l + 1),
         optimal_probe_detuning(tones[l].mode, delta_ac, driving.detuning)});

  // flatten (column, point) work items; slot writes keep order deterministic
  std::vector<std::vector<double>> scatter(
      n_cols, std::vector<double>(grid.size() + markers.size()));
  std::vector<double> all_points = grid;
  for (const auto& m : markers) all_points.push_back(m.second);
  const int tasks = n_cols * static_cast<int>(all_points.size());
  parallel_for(tasks, args.threads, [&](int i) {
    const int c = i / static_cast<int>(all_points.size());
    const int p = i % static_cast<int>(all_points.size());
    AbsorptionProfile prof =
        absorption_profile(driving, atom, {all_points[p]}, column_rabi(c));
    scatter[c][p] = prof.scattering[0];
  });

  std::vector<std::string> header = {"kind", "label", "delta_g_mhz"};
  if (n_cols == 1) {
    header.push_back("scattering_per_us");
  } else {
    for (int c = 1; c <= n_cols; ++c)
      header.push_back("scattering_" + std::to_string(c) + "_per_us");
  }
  CsvBuilder csv(header);
  for (size_t p = 0; p < grid.size(); ++p) {
    std::vector<std::string> row = {"grid", "",
                                    csv_double(rad_us_to_mhz(grid[p]))};
    for (int c = 0; c < n_cols; ++c) row.push_back(csv_double(scatter[c][p]));
    csv.add_row(row);
  }
  for (size_t m = 0; m < markers.size(); ++m) {
    std::vector<std::string> row = {
        "marker", markers[m].first,
        csv_double(rad_us_to_mhz(markers[m].second))};
    for (int c = 0; c < n_cols; ++c)
      row.push_back(csv_double(scatter[c][grid.size() + m]));
    csv.add_row(row);
  }

  json tones_json = json::array();
  for (const Tone& t : tones)
    tones_json.push_back(
        {{"mode_rad_us", t.mode}, {"rabi_rad_us", t.rabi}});
  json meta;
  meta["command"] = "profile";
  meta["config"] = {{"command", "profile"},
                    {"driving_detuning_rad_us", driving.detuning},
                    {"driving_rabi_rad_us", driving.rabi},
                    {"gamma_rad_us", atom.gamma},
                    {"gamma_g_rad_us", atom.gamma_g},
                    {"gamma_r_rad_us", atom.gamma_r},
                    {"probe_rabi_rad_us", probe_rabi},
                    {"grid_min_rad_us", g_min},
                    {"grid_max_rad_us", g_max},
                    {"grid_step_rad_us", g_step},
                    {"tones", tones_json}};
  meta["derived"] = {{"ac_stark_rad_us", delta_ac}};
  meta["accuracy"] = {
      {"note", "steady states from dense kernel SVD, residual <= 1e-10"}};
  write_bundle(args, output_stem(args, "profile"), csv.text(), meta);
  return 0;
}

// ---------------------------------------------------------------- sweep

int cmd_sweep(const CliArgs& args) {
  ConfigReader cfg(load_config(args, "sweep"));
  cfg.text_or("command", "sweep");

  LaserTone driving;
  driving.detuning = cfg.angular("driving_detuning");
  const double driving_axis = cfg.number_or("driving_axis", -1.0);
  driving.axis_projection = {driving_axis, 0.0, 0.0};
  const double ac_stark = cfg.angular("driving_stark");
  driving.rabi = driving_rabi_for_stark(ac_stark, driving.detuning);

  AtomParams atom = AtomParams::balanced(
      cfg.angular("gamma"), cfg.number_or("alpha", 1.0 / 3.0));
  const double probe_rabi = cfg.angular("probe_rabi");
  const double w_min = cfg.angular("omega_min");
  const double w_max = cfg.angular("omega_max");
  const double w_step = cfg.angular("omega_step");
  const double eta_coef = cfg.number_or("eta_coefficient", 0.29);
  cfg.finish();

  if (w_step <= 0.0 || w_max <= w_min)
    throw ConfigError("sweep grid must have omega_min < omega_max, step > 0");
  const int n_points =
      static_cast<int>(std::round((w_max - w_min) / w_step)) + 1;
  std::vector<double> grid(n_points);
  for (int i = 0; i < n_points; ++i) grid[i] = w_min + i * w_step;

  auto eta_rule = [eta_coef](double w) {
    return eta_coef / std::sqrt(rad_us_to_mhz(w));
  };
  std::vector<SweepPoint> points =
      sweep_mode_frequency(grid, ac_stark, driving, probe_rabi, atom, eta_rule);

  CsvBuilder csv({"omega_mhz", "eta", "w_parallel_per_us", "nss_parallel",
                  "w_eit_per_us", "nss_eit", "parallel_divergent",
                  "eit_divergent"});
  for (const SweepPoint& p : points)
    csv.add_row({csv_double(rad_us_to_mhz(p.omega)), csv_double(p.eta),
                 csv_double(p.w_parallel), csv_double(p.nss_parallel),
                 csv_double(p.w_eit), csv_double(p.nss_eit),
                 p.parallel_divergent ? "1" : "0",
                 p.eit_divergent ? "1" : "0"});

  json meta;
  meta["command"] = "sweep";
  meta["config"] = {{"command", "sweep"},
                    {"driving_detuning_rad_us", driving.detuning},
                    {"driving_stark_rad_us", ac_stark},
                    {"driving_axis", driving_axis},
                    {"gamma_rad_us", atom.gamma},
                    {"alpha", atom.alpha},
                    {"probe_rabi_rad_us", probe_rabi},
                    {"omega_min_rad_us", w_min},
                    {"omega_max_rad_us", w_max},
                    {"omega_step_rad_us", w_step},
                    {"eta_coefficient", eta_coef}};
  meta["derived"] = {{"driving_rabi_rad_us", driving.rabi}};
  meta["accuracy"] = {{"note", "closed-form rate expressions; no integration"}};
  write_bundle(args, output_stem(args, "sweep"), csv.text(), meta);
  return 0;
}

// ----------------------------------------------------------------- cool

int cmd_cool(const CliArgs& args) {
  ConfigReader cfg(load_config(args, "cool"));
  cfg.text_or("command", "cool");
  const std::string model_kind = cfg.text("model");

  CoolingConfig cc;
  cc.atom = AtomParams::balanced(cfg.angular("gamma"),
                                 cfg.number_or("alpha", 1.0 / 3.0));
  if (cfg.has("gamma_g_mhz") || cfg.has("gamma_g_rad_us"))
    cc.atom.gamma_g = cfg.angular("gamma_g");
  if (cfg.has("gamma_r_mhz") || cfg.has("gamma_r_rad_us"))
    cc.atom.gamma_r = cfg.angular("gamma_r");

  cc.driving.detuning = cfg.angular("driving_detuning");
  const bool has_rabi =
      cfg.has("driving_rabi_mhz") || cfg.has("driving_rabi_rad_us");
  const bool has_stark =
      cfg.has("driving_stark_mhz") || cfg.has("driving_stark_rad_us");
  if (has_rabi == has_stark)
    throw ConfigError(
        "give exactly one of driving_rabi_* and driving_stark_*");
  cc.driving.rabi =
      has_rabi ? cfg.angular("driving_rabi")
               : driving_rabi_for_stark(cfg.angular("driving_stark"),
                                        cc.driving.detuning);
  const double driving_axis = cfg.number_or("driving_axis", 1.0);
  cc.driving.axis_projection = {driving_axis, 0.0, 0.0};
  cc.mismatch = cfg.angular_or("mismatch", 0.0);

  const double t_max = cfg.number("t_max_us");
  const int samples = cfg.integer_or("samples", 200);
  const double nbar0 = cfg.number_or("nbar0", 2.0);
  const bool expect_cooling = cfg.flag_or("expect_cooling", true);
  EvolveOptions opts;
  opts.dt_override = cfg.number_or("dt_override_us", 0.0);

  QuantumModel model;
  json resolved;
  resolved["command"] = "cool";
  resolved["model"] = model_kind;
  resolved["gamma_rad_us"] = cc.atom.gamma;
  resolved["gamma_g_rad_us"] = cc.atom.gamma_g;
  resolved["gamma_r_rad_us"] = cc.atom.gamma_r;
  resolved["alpha"] = cc.atom.alpha;
  resolved["driving_detuning_rad_us"] = cc.driving.detuning;
  resolved["driving_rabi_rad_us"] = cc.driving.rabi;
  resolved["driving_axis"] = driving_axis;
  resolved["mismatch_rad_us"] = cc.mismatch;
  resolved["t_max_us"] = t_max;
  resolved["samples"] = samples;
  resolved["nbar0"] = nbar0;
  resolved["expect_cooling"] = expect_cooling;
  resolved["dt_override_us"] = opts.dt_override;

  json design;
  json analytic;
  bool resonant_only = false;
  bool exact_displacement = false;

  if (model_kind == "single-mode") {
    const double mode_freq = cfg.angular("mode_freq");
    const double eta_g = cfg.number("eta_g");
    const double eta_r = cfg.number("eta_r");
    const double probe_axis = cfg.number_or("probe_axis", 1.0);
    const int fock_dim = cfg.integer_or("fock_dim", 0);
    exact_displacement = cfg.flag_or("exact_displacement", false);
    LaserTone probe;
    probe.rabi = cfg.angular("probe_rabi");
    probe.detuning = cfg.angular("probe_detuning");
    probe.axis_projection = {probe_axis, 0.0, 0.0};
    cc.probes = {probe};
    cfg.finish();

    model = build_single_mode_model(cc, mode_freq, eta_g, eta_r, fock_dim,
                                    nbar0, exact_displacement);
    resolved["mode_freq_rad_us"] = mode_freq;
    resolved["eta_g"] = eta_g;
    resolved["eta_r"] = eta_r;
    resolved["probe_axis"] = probe_axis;
    resolved["probe_rabi_rad_us"] = probe.rabi;
    resolved["probe_detuning_rad_us"] = probe.detuning;
    resolved["fock_dim"] = model.layout.factors[1];
    resolved["exact_displacement"] = exact_displacement;

    LaserTone shifted = probe;
    shifted.detuning = cc.probe_detuning(0);
    RateReport th =
        rates(mode_freq, shifted, cc.driving, cc.atom, eta_g, eta_r);
    analytic = {{"w_per_us", th.w},
                {"n_ss", th.n_ss},
                {"divergent", th.divergent}};
  } else if (model_kind == "two-mode" || model_kind == "two-ion") {
    std::vector<double> freqs;
    if (cfg.has("mode_freqs_mhz")) {
      for (double f : cfg.number_list("mode_freqs_mhz"))
        freqs.push_back(mhz_to_rad_us(f));
    } else {
      freqs = cfg.number_list("mode_freqs_rad_us");
    }
    if (freqs.size() != 2) throw ConfigError("need exactly 2 mode_freqs");

    std::vector<double> etas;
    if (cfg.has("etas")) {
      etas = cfg.number_list("etas");
    } else {
      // eta ~ 1/sqrt(omega), anchored on the first mode
      const double eta_ref = cfg.number("eta_reference");
      for (double f : freqs) etas.push_back(eta_ref * std::sqrt(freqs[0] / f));
    }
    if (etas.size() != 2) throw ConfigError("need exactly 2 etas");

    std::vector<double> dims_in =
        cfg.number_list_or("fock_dims", {24.0, 24.0});
    if (dims_in.size() != 2) throw ConfigError("need exactly 2 fock_dims");
    std::array<int, 2> dims = {static_cast<int>(dims_in[0]),
                               static_cast<int>(dims_in[1])};
    resonant_only = cfg.flag_or("resonant_only", false);

    json probe_list = cfg.child("probes");
    if (!probe_list.is_array() || probe_list.size() != 2)
      throw ConfigError("probes must be an array of 2 tones");
    for (size_t i = 0; i < probe_list.size(); ++i) {
      ConfigReader pr(probe_list[i], "probes[" + std::to_string(i) + "]");
      LaserTone tone;
      tone.rabi = pr.angular("rabi");
      tone.detuning = pr.angular("detuning");
      pr.finish();
      cc.probes.push_back(tone);
    }
    cfg.finish();

    if (model_kind == "two-mode")
      model = build_2d_model(cc, {freqs[0], freqs[1]}, {etas[0], etas[1]},
                             dims, nbar0, resonant_only);
    else
      model = build_two_ion_model(cc, {freqs[0], freqs[1]},
                                  {etas[0], etas[1]}, dims, nbar0,
                                  resonant_only);

    resolved["mode_freqs_rad_us"] = freqs;
    resolved["etas"] = etas;
    resolved["fock_dims"] = {dims[0], dims[1]};
    resolved["resonant_only"] = resonant_only;
    json probes_json = json::array();
    for (const LaserTone& t : cc.probes)
      probes_json.push_back(
          {{"rabi_rad_us", t.rabi}, {"detuning_rad_us", t.detuning}});
    resolved["probes"] = probes_json;
  } else {
    throw ConfigError("model must be single-mode, two-mode, or two-ion");
  }

  design["model"] = model_kind;
  design["resonant_only"] = resonant_only;
  design["exact_displacement"] = exact_displacement;
  design["first_order_lamb_dicke"] = !exact_displacement;
  design["probe_regime_warning"] = cc.regime_warning();
  if (cc.regime_warning())
    std::cerr << "warning: a probe Rabi frequency exceeds 0.3x the driving; "
                 "the weak-probe reduction is strained\n";

  CoolingRun run = simulate_cooling(model, t_max, samples, opts);

  std::vector<std::string> header = {"time_us"};
  for (size_t m = 0; m < run.nbar.size(); ++m)
    header.push_back("nbar_" + std::to_string(m));
  CsvBuilder csv(header);
  for (size_t i = 0; i < run.times.size(); ++i) {
    std::vector<std::string> row = {csv_double(run.times[i])};
    for (const auto& series : run.nbar) row.push_back(csv_double(series[i]));
    csv.add_row(row);
  }

  json fits = json::array();
  for (const ModeFit& f : run.fits)
    fits.push_back({{"w_per_us", f.w},
                    {"n_ss", f.n_ss},
                    {"amplitude", f.amplitude},
                    {"residual_rms", f.residual_rms},
                    {"heating", f.heating}});

  json meta;
  meta["command"] = "cool";
  meta["config"] = resolved;
  meta["design"] = design;
  meta["fits"] = fits;
  if (!analytic.is_null()) meta["analytic"] = analytic;
  meta["accuracy"] = {{"trace_drift", run.hygiene.trace_drift},
                      {"hermiticity", run.hygiene.hermiticity},
                      {"min_eigenvalue", run.hygiene.min_eigenvalue},
                      {"fock_tail", run.hygiene.fock_tail},
                      {"dt_us", run.dt},
                      {"steps", run.steps}};
  write_bundle(args, output_stem(args, "cool"), csv.text(), meta);

  if (expect_cooling)
    for (const ModeFit& f : run.fits)
      if (f.heating) {
        std::cerr << "cooling expected but a fitted rate is not positive\n";
        return 4;
      }
  return 0;
}

// --------------------------------------------------------------- thermo

int thermo_trace(const CliArgs& args) {
  auto load_trace = [](const std::string& path) {
    std::ifstream f(path);
    if (!f) throw ConfigError("cannot read trace " + path);
    return parse_trace_csv(f);
  };
  const TraceData blue = load_trace(args.trace_blue);
  const TraceData red = load_trace(args.trace_red);
  if (args.factor <= 0.0)
    throw ConfigError("trace mode needs --factor > 0");

  auto fit_trace = [&](const TraceData& tr) {
    const double span = tr.times.back() - tr.times.front();
    if (span <= 0.0) throw ConfigError("trace times must increase");
    double dt_min = span;
    for (size_t i = 1; i < tr.times.size(); ++i)
      dt_min = std::min(dt_min, tr.times[i] - tr.times[i - 1]);
    const double lo = args.nu_min > 0.0 ? args.nu_min : pi / span;
    const double hi = args.nu_max > 0.0
                          ? args.nu_max
                          : std::min(60.0 * pi / span, 0.9 * pi / dt_min);
    if (hi <= lo) throw ConfigError("trace frequency grid is empty");
    return fit_sinsq_amplitude(tr.times, tr.values, lo, hi, args.nu_points);
  };
  const SinSqFit fb = fit_trace(blue);
  const SinSqFit fr = fit_trace(red);
  const NbarEstimate est =
      asymmetry_estimate(fb.amplitude, fr.amplitude, args.factor);

  CsvBuilder csv({"quantity", "value"});
  csv.add_row({"amplitude_blue", csv_double(fb.amplitude)});
  csv.add_row({"amplitude_red", csv_double(fr.amplitude)});
  csv.add_row({"nu_blue_rad_us", csv_double(fb.frequency)});
  csv.add_row({"nu_red_rad_us", csv_double(fr.frequency)});
  csv.add_row({"factor", csv_double(args.factor)});
  csv.add_row({"nbar", csv_double(est.nbar)});
  csv.add_row({"saturated", est.saturated ? "1" : "0"});

  json meta;
  meta["command"] = "thermo";
  meta["config"] = {{"command", "thermo"},
                    {"trace_blue", args.trace_blue},
                    {"trace_red", args.trace_red},
                    {"factor", args.factor},
                    {"nu_min_rad_us", args.nu_min},
                    {"nu_max_rad_us", args.nu_max},
                    {"nu_points", args.nu_points}};
  meta["estimate"] = {{"nbar", est.nbar}, {"saturated", est.saturated}};
  meta["accuracy"] = {{"blue_score", fb.score}, {"red_score", fr.score}};
  write_bundle(args, output_stem(args, "thermo-trace"), csv.text(), meta);

  if (est.saturated) {
    std::cerr << "blue amplitude not above red: occupation unresolvable\n";
    return 4;
  }
  return 0;
}

int cmd_thermo(const CliArgs& args) {
  if (!args.trace_blue.empty() || !args.trace_red.empty()) {
    if (args.trace_blue.empty() || args.trace_red.empty())
      throw ConfigError("trace mode needs both --trace-blue and --trace-red");
    return thermo_trace(args);
  }

  ConfigReader cfg(load_config(args, "thermo"));
  cfg.text_or("command", "thermo");

  ChainConfig chain;
  chain.ion_count = cfg.integer("ions");
  chain.omega_z = cfg.angular("omega_z");
  chain.omega_x = cfg.angular_or("omega_x", 0.0);
  chain.omega_y = cfg.angular_or("omega_y", 0.0);
  const double wavelength = cfg.number_or("wavelength_nm", ca40_wavelength_nm);
  const double angle_deg = cfg.number_or("beam_angle_deg", 45.0);
  const double mass_u = cfg.number_or("mass_u", ca40_mass_si / amu_si);
  chain.mass_kg = mass_u * amu_si;

  std::vector<std::string> branches;
  if (cfg.has("branches")) {
    for (const auto& b : cfg.child("branches")) {
      if (!b.is_string()) throw ConfigError("branches must be strings");
      branches.push_back(b.get<std::string>());
    }
  } else {
    branches = {"x", "z"};
  }

  ThermometrySetup base;
  base.ion_count = chain.ion_count;
  base.rabi = cfg.angular_or("rabi", 1.0);
  base.fock_dim = cfg.integer_or("fock_dim", 24);
  base.samples = cfg.integer_or("samples", 800);
  base.window_periods = cfg.number_or("window_periods", 2.05);
  base.nu_points = cfg.integer_or("nu_points", 500);
  base.nu_lo_frac = cfg.number_or("nu_lo_frac", 0.6);
  base.nu_hi_frac = cfg.number_or("nu_hi_frac", 3.0);
  const std::string observable = cfg.text_or("observable", "mean");
  if (observable == "mean")
    base.observable = UpObservable::mean_fraction;
  else if (observable == "any")
    base.observable = UpObservable::any_ion;
  else
    throw ConfigError("observable must be 'mean' or 'any'");
  const std::vector<double> nbar_grid =
      cfg.number_list_or("nbar_grid", default_nbar_grid());
  cfg.finish();

  const double k_proj =
      wavevector_rad_um(wavelength) * std::cos(angle_deg * pi / 180.0);

  struct Task {
    std::string branch;
    int index = 0;
    std::string label;
    double freq = 0.0;
    ThermometrySetup setup;
  };
  std::vector<Task> tasks;
  for (const std::string& b : branches) {
    ModeStructure modes;
    if (b == "z")
      modes = axial_modes(chain);
    else if (b == "x")
      modes = transverse_modes(chain, Axis::x);
    else if (b == "y")
      modes = transverse_modes(chain, Axis::y);
    else
      throw ConfigError("branch must be x, y, or z");
    const Eigen::MatrixXd eta =
        lamb_dicke_factors(modes, k_proj, chain.mass_kg);
    for (int k = 0; k < chain.ion_count; ++k) {
      Task t;
      t.branch = b;
      t.index = k;
      t.label = mode_label(modes.eigenvectors.col(k));
      t.freq = modes.frequencies[k];
      t.setup = base;
      t.setup.label = b + "-" + t.label;
      t.setup.etas.assign(eta.col(k).data(),
                          eta.col(k).data() + chain.ion_count);
      tasks.push_back(t);
    }
  }

  std::vector<CorrectionFactor> results(tasks.size());
  parallel_for(static_cast<int>(tasks.size()), args.threads, [&](int i) {
    results[i] = correction_factor(tasks[i].setup, nbar_grid);
  });

  CsvBuilder csv({"branch", "mode_index", "label", "freq_mhz", "factor",
                  "r_squared", "stderr_slope"});
  json detail = json::array();
  double worst_tail = 0.0, worst_drift = 0.0, worst_trunc = 0.0;
  for (size_t i = 0; i < tasks.size(); ++i) {
    const Task& t = tasks[i];
    const CorrectionFactor& cf = results[i];
    csv.add_row({t.branch, std::to_string(t.index), t.label,
                 csv_double(rad_us_to_mhz(t.freq)), csv_double(cf.value),
                 csv_double(cf.r_squared), csv_double(cf.fit_uncertainty)});
    detail.push_back({{"branch", t.branch},
                      {"mode_index", t.index},
                      {"label", t.label},
                      {"freq_rad_us", t.freq},
                      {"etas", t.setup.etas},
                      {"factor", cf.value},
                      {"r_squared", cf.r_squared},
                      {"asymmetries", cf.asymmetries}});
    worst_tail = std::max(worst_tail, cf.tail);
    worst_drift = std::max(worst_drift, cf.norm_drift);
    worst_trunc = std::max(worst_trunc, cf.weight_truncation);
  }

  json meta;
  meta["command"] = "thermo";
  meta["config"] = {{"command", "thermo"},
                    {"ions", chain.ion_count},
                    {"omega_z_rad_us", chain.omega_z},
                    {"omega_x_rad_us", chain.omega_x},
                    {"omega_y_rad_us", chain.omega_y},
                    {"wavelength_nm", wavelength},
                    {"beam_angle_deg", angle_deg},
                    {"mass_u", mass_u},
                    {"branches", branches},
                    {"rabi_rad_us", base.rabi},
                    {"fock_dim", base.fock_dim},
                    {"samples", base.samples},
                    {"window_periods", base.window_periods},
                    {"nu_points", base.nu_points},
                    {"nu_lo_frac", base.nu_lo_frac},
                    {"nu_hi_frac", base.nu_hi_frac},
                    {"observable", observable},
                    {"nbar_grid", nbar_grid}};
  meta["design"] = {{"observable", observable},
                    {"protocol", "sin^2 amplitude fit over a frequency grid"}};
  meta["modes"] = detail;
  meta["accuracy"] = {{"fock_tail", worst_tail},
                      {"norm_drift", worst_drift},
                      {"thermal_weight_truncation", worst_trunc}};
  write_bundle(args, output_stem(args, "thermo"), csv.text(), meta);
  return 0;
}

void add_common_flags(CLI::App* sub, CliArgs& args) {
  sub->add_option("--config", args.config_path, "JSON config file");
  sub->add_option("--preset", args.preset, "built-in preset name");
  sub->add_option("--out", args.out_dir, "output directory");
  sub->add_option("--threads", args.threads, "worker threads for sweeps");
}

} // namespace

int cli_main(int argc, char** argv) {
  CLI::App app{"parallel-EIT cooling toolkit"};
  app.require_subcommand(1);
  CliArgs args;

  CLI::App* modes = app.add_subcommand("modes", "ion-chain normal modes");
  CLI::App* profile =
      app.add_subcommand("profile", "steady-state absorption profile");
  CLI::App* sweep =
      app.add_subcommand("sweep", "cooling limits over mode frequency");
  CLI::App* cool = app.add_subcommand("cool", "open-system cooling dynamics");
  CLI::App* thermo =
      app.add_subcommand("thermo", "sideband thermometry calibration");
  for (CLI::App* sub : {modes, profile, sweep, cool, thermo})
    add_common_flags(sub, args);
  thermo->add_option("--trace-blue", args.trace_blue,
                     "blue-sideband trace CSV (time_us,excitation)");
  thermo->add_option("--trace-red", args.trace_red,
                     "red-sideband trace CSV (time_us,excitation)");
  thermo->add_option("--factor", args.factor,
                     "correction factor for the trace estimate");
  thermo->add_option("--nu-min-rad-us", args.nu_min,
                     "trace fit grid lower bound");
  thermo->add_option("--nu-max-rad-us", args.nu_max,
                     "trace fit grid upper bound");
  thermo->add_option("--nu-points", args.nu_points, "trace fit grid size");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_name() == "CallForHelp" || e.get_name() == "CallForAllHelp")
      return app.exit(e);
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }

  try {
    if (modes->parsed()) return cmd_modes(args);
    if (profile->parsed()) return cmd_profile(args);
    if (sweep->parsed()) return cmd_sweep(args);
    if (cool->parsed()) return cmd_cool(args);
    if (thermo->parsed()) return cmd_thermo(args);
    std::cerr << "error: no subcommand\n";
    return 2;
  } catch (const DimensionCapExceeded& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const DomainError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const IntegrationAccuracyError& e) {
    std::cerr << "accuracy failure: " << e.what() << "\n";
    return 3;
  } catch (const SolverFailure& e) {
    std::cerr << "solver failure: " << e.what() << "\n";
    return 3;
  } catch (const RegimeViolation& e) {
    std::cerr << "regime violation: " << e.what() << "\n";
    return 4;
  } catch (const StructuralInstability& e) {
    std::cerr << "regime violation: " << e.what() << "\n";
    return 4;
  } catch (const PoleError& e) {
    std::cerr << "regime violation: " << e.what() << "\n";
    return 4;
  } catch (const SteadyStateAmbiguity& e) {
    std::cerr << "regime violation: " << e.what() << "\n";
    return 4;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}

} // namespace peit
