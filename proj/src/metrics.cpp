// SPDX-License-Identifier: Apache-2.0

#include "ngrpo/metrics.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace ngrpo {

std::string format_double(double v) {
  // Shortest representation that parses back to the same double.
  char buf[40];
  for (int prec = 1; prec <= 17; ++prec) {
    std::snprintf(buf, sizeof(buf), "%.*g", prec, v);
    if (std::strtod(buf, nullptr) == v) return buf;
  }
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

void MetricsLog::write_csv(const std::string& path, bool include_timing) const {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("metrics: cannot write " + path);
  out << "# config=" << config_hash << " seed=" << seed << " version=" << kVersionTag
      << "\n";
  out << "iter,variant,mean_reward,std_reward,objective,frac_clipped,"
         "nfe_old,nfe_theta,wall_ms,seed\n";
  for (const auto& m : rows) {
    out << m.iter << ',' << m.variant << ',' << format_double(m.mean_reward) << ','
        << format_double(m.std_reward) << ',' << format_double(m.objective) << ','
        << format_double(m.frac_clipped) << ',' << format_double(m.nfe_old) << ','
        << format_double(m.nfe_theta) << ','
        << format_double(include_timing ? m.wall_ms : 0.0) << ',' << m.seed << "\n";
  }
}

MetricsLog MetricsLog::read_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("metrics: cannot open " + path);
  MetricsLog log;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (line[0] == '#') {
      const auto cpos = line.find("config=");
      if (cpos != std::string::npos) {
        const auto end = line.find(' ', cpos);
        log.config_hash = line.substr(cpos + 7, end - cpos - 7);
      }
      const auto spos = line.find("seed=");
      if (spos != std::string::npos)
        log.seed = std::strtoull(line.c_str() + spos + 5, nullptr, 10);
      continue;
    }
    if (line.rfind("iter,", 0) == 0) continue;  // header row
    std::stringstream ss(line);
    std::string field;
    IterationMetrics m;
    auto next = [&]() {
      if (!std::getline(ss, field, ',')) throw std::runtime_error("metrics: short row");
      return field;
    };
    m.iter = std::stoi(next());
    m.variant = next();
    m.mean_reward = std::strtod(next().c_str(), nullptr);
    m.std_reward = std::strtod(next().c_str(), nullptr);
    m.objective = std::strtod(next().c_str(), nullptr);
    m.frac_clipped = std::strtod(next().c_str(), nullptr);
    m.nfe_old = std::strtod(next().c_str(), nullptr);
    m.nfe_theta = std::strtod(next().c_str(), nullptr);
    m.wall_ms = std::strtod(next().c_str(), nullptr);
    m.seed = std::strtoull(next().c_str(), nullptr, 10);
    log.rows.push_back(std::move(m));
  }
  return log;
}

std::vector<double> MetricsLog::reward_curve() const {
  std::vector<double> out;
  out.reserve(rows.size());
  for (const auto& m : rows) out.push_back(m.mean_reward);
  return out;
}

std::vector<double> moving_average(const std::vector<double>& xs, int w) {
  std::vector<double> out;
  out.reserve(xs.size());
  double acc = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    acc += xs[i];
    if (i >= static_cast<std::size_t>(w)) acc -= xs[i - static_cast<std::size_t>(w)];
    const double n = static_cast<double>(std::min<std::size_t>(i + 1, static_cast<std::size_t>(w)));
    out.push_back(acc / n);
  }
  return out;
}

void write_samples_csv(const std::vector<Vec>& samples, const std::string& path,
                       const std::string& config_hash, std::uint64_t seed) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("metrics: cannot write " + path);
  out << "# config=" << config_hash << " seed=" << seed << "\n";
  const std::size_t d = samples.empty() ? 0 : samples.front().size();
  for (std::size_t i = 0; i < d; ++i) out << (i ? "," : "") << "x" << i;
  out << "\n";
  for (const auto& s : samples) {
    for (std::size_t i = 0; i < s.size(); ++i)
      out << (i ? "," : "") << format_double(s[i]);
    out << "\n";
  }
}

}  // namespace ngrpo
