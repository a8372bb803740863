#include "kmor/gramian.hpp"

#include <sstream>

#include "kmor/csv.hpp"
#include "kmor/errors.hpp"

namespace kmor {

GramianDataset collect(const ControlSystem& sys, const TimeGrid& grid) {
  grid.validate();
  const int N = grid.samples;

  Eigen::MatrixXd ctrl(static_cast<Eigen::Index>(N) * sys.m, sys.n);
  for (int j = 0; j < sys.m; ++j) {
    Trajectory traj;
    try {
      traj = impulse_response(sys, j, grid);
    } catch (const DivergenceError& e) {
      std::ostringstream msg;
      msg << "impulse run on channel " << (j + 1) << " diverged at t = "
          << e.time();
      throw DivergenceError(msg.str(), e.time());
    }
    for (int i = 0; i < N; ++i) {
      ctrl.row(static_cast<Eigen::Index>(i) * sys.m + j) = traj.states.col(i);
    }
  }

  // Output responses y^k(t_i) for initial conditions e_k; the
  // observability sample for (time i, output j) collects coordinate j
  // of every run, giving a vector indexed by k (state space).
  Eigen::MatrixXd obs(static_cast<Eigen::Index>(N) * sys.p, sys.n);
  for (int k = 0; k < sys.n; ++k) {
    Trajectory traj;
    try {
      traj = observability_response(sys, k, grid);
    } catch (const DivergenceError& e) {
      std::ostringstream msg;
      msg << "initial-condition run " << (k + 1) << " diverged at t = "
          << e.time();
      throw DivergenceError(msg.str(), e.time());
    }
    for (int i = 0; i < N; ++i) {
      for (int j = 0; j < sys.p; ++j) {
        obs(static_cast<Eigen::Index>(i) * sys.p + j, k) = traj.outputs(j, i);
      }
    }
  }

  GramianDataset ds;
  ds.grid = grid;
  ds.m = sys.m;
  ds.p = sys.p;
  ds.ctrl = SamplePanel(std::move(ctrl));
  ds.obs = SamplePanel(std::move(obs));
  return ds;
}

EmpiricalGramianPair empirical_gramians(const GramianDataset& ds) {
  if (ds.ctrl.count() == 0 || ds.obs.count() == 0) {
    throw NumericError("empirical_gramians: empty dataset");
  }
  EmpiricalGramianPair g;
  g.scale_c = ds.ctrl_scale();
  g.scale_o = ds.obs_scale();
  const Eigen::MatrixXd& X = ds.ctrl.matrix();
  const Eigen::MatrixXd& D = ds.obs.matrix();
  g.Wc = g.scale_c * (X.transpose() * X);
  g.Wo = g.scale_o * (D.transpose() * D);
  return g;
}

LinearBalance linear_balance(const EmpiricalGramianPair& g,
                             const ToleranceConfig& tol) {
  const Eigen::MatrixXd Z = jittered_cholesky(g.Wo, tol);
  const SymEig eig = sym_eig_descending(Z.transpose() * g.Wc * Z);
  const Eigen::VectorXd sigma = eig.values.cwiseMax(0.0).cwiseSqrt();
  // T = Sigma^{-1/2} U^T Z^T satisfies T Wc T^T = T^-T Wo T^-1 = Sigma.
  Eigen::VectorXd inv_sqrt(sigma.size());
  for (Eigen::Index i = 0; i < sigma.size(); ++i) {
    if (!(sigma(i) > 0.0)) {
      throw NumericError("linear_balance: zero Hankel value; Gramian pair is degenerate");
    }
    inv_sqrt(i) = 1.0 / std::sqrt(sigma(i));
  }
  LinearBalance out;
  out.T = inv_sqrt.asDiagonal() * eig.vectors.transpose() * Z.transpose();
  out.sigma = sigma;
  return out;
}

void write_dataset_csv(const GramianDataset& ds, const std::string& path) {
  CsvWriter w(path);
  std::vector<std::string> names = {"tag", "time_index", "channel"};
  for (Eigen::Index k = 0; k < ds.ctrl.dim(); ++k) {
    names.push_back("x" + std::to_string(k + 1));
  }
  w.header(names);
  // Metadata row carrying the grid; always exactly six fields.
  w.begin_row();
  w.field(std::string("grid"));
  w.field(static_cast<long>(ds.grid.samples));
  w.field(static_cast<long>(ds.grid.substeps));
  w.field(ds.grid.t_final);
  w.field(static_cast<long>(ds.m));
  w.field(static_cast<long>(ds.p));
  w.end_row();
  auto dump = [&](const char* tag, const SamplePanel& panel, int channels) {
    for (Eigen::Index r = 0; r < panel.count(); ++r) {
      w.begin_row();
      w.field(std::string(tag));
      w.field(static_cast<long>(r / channels + 1));
      w.field(static_cast<long>(r % channels + 1));
      for (Eigen::Index k = 0; k < panel.dim(); ++k) {
        w.field(panel.matrix()(r, k));
      }
      w.end_row();
    }
  };
  dump("ctrl", ds.ctrl, ds.m);
  dump("obs", ds.obs, ds.p);
}

GramianDataset read_dataset_csv(const std::string& path) {
  const CsvTable table = read_csv(path);
  if (table.header.size() < 4 || table.header[0] != "tag") {
    throw ConfigError("dataset CSV: unexpected header in " + path);
  }
  const int n = static_cast<int>(table.header.size()) - 3;
  GramianDataset ds;
  std::vector<std::vector<double>> ctrl_rows, obs_rows;
  bool have_grid = false;
  for (const auto& row : table.rows) {
    if (row[0] == "grid") {
      if (row.size() != 6) throw ConfigError("dataset CSV: bad grid row in " + path);
      ds.grid.samples = static_cast<int>(parse_long(row[1]));
      ds.grid.substeps = static_cast<int>(parse_long(row[2]));
      ds.grid.t_final = parse_double(row[3]);
      ds.m = static_cast<int>(parse_long(row[4]));
      ds.p = static_cast<int>(parse_long(row[5]));
      have_grid = true;
      continue;
    }
    if (row.size() != table.header.size()) {
      throw ConfigError("dataset CSV: ragged row in " + path);
    }
    std::vector<double> entries(static_cast<std::size_t>(n));
    for (int k = 0; k < n; ++k) {
      entries[static_cast<std::size_t>(k)] = parse_double(row[static_cast<std::size_t>(k) + 3]);
    }
    if (row[0] == "ctrl") {
      ctrl_rows.push_back(std::move(entries));
    } else if (row[0] == "obs") {
      obs_rows.push_back(std::move(entries));
    } else {
      throw ConfigError("dataset CSV: unknown tag '" + row[0] + "'");
    }
  }
  if (!have_grid) throw ConfigError("dataset CSV: missing grid row in " + path);
  auto to_panel = [n](const std::vector<std::vector<double>>& rows) {
    Eigen::MatrixXd M(static_cast<Eigen::Index>(rows.size()), n);
    for (std::size_t r = 0; r < rows.size(); ++r) {
      for (int k = 0; k < n; ++k) M(static_cast<Eigen::Index>(r), k) = rows[r][static_cast<std::size_t>(k)];
    }
    return SamplePanel(std::move(M));
  };
  ds.ctrl = to_panel(ctrl_rows);
  ds.obs = to_panel(obs_rows);
  if (ds.ctrl.count() != static_cast<Eigen::Index>(ds.grid.samples) * ds.m ||
      ds.obs.count() != static_cast<Eigen::Index>(ds.grid.samples) * ds.p) {
    throw ConfigError("dataset CSV: sample counts inconsistent with grid");
  }
  return ds;
}

}  // namespace kmor
