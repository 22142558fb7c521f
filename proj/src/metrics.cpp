#include "uavei/metrics.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <stdexcept>

namespace uavei {

std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

namespace {

std::ofstream open_out(const std::string& path) {
    std::ofstream f(path, std::ios::trunc);
    if (!f) throw std::runtime_error("cannot open output file: " + path);
    return f;
}

} // namespace

void write_metrics_csv(const std::string& path, const std::vector<MetricsRow>& rows) {
    auto f = open_out(path);
    f << "episode,reward,accuracy,d_dev,offload_ratio,critic_loss,actor_objective\n";
    for (const auto& r : rows) {
        f << r.episode << ',' << format_double(r.reward) << ',' << format_double(r.accuracy)
          << ',' << format_double(r.d_dev) << ',' << format_double(r.offload_ratio) << ','
          << format_double(r.critic_loss) << ',' << format_double(r.actor_objective) << '\n';
    }
}

void write_trajectory_csv(const std::string& path, const std::vector<TrajectoryRow>& rows) {
    auto f = open_out(path);
    f << "episode,slot,x,y,heading,reward,deviation\n";
    for (const auto& r : rows) {
        f << r.episode << ',' << r.slot << ',' << format_double(r.x) << ','
          << format_double(r.y) << ',' << format_double(r.heading) << ','
          << format_double(r.reward) << ',' << format_double(r.deviation) << '\n';
    }
}

void write_eval_report_csv(const std::string& path, const EvalReport& rep,
                           double dev_threshold) {
    auto f = open_out(path);
    f << "metric,value,value2\n";
    f << "episodes," << rep.episodes << ",\n";
    f << "accuracy_mean_std," << format_double(rep.accuracy_mean) << ','
      << format_double(rep.accuracy_std) << '\n';
    f << "reward_mean_std," << format_double(rep.reward_mean) << ','
      << format_double(rep.reward_std) << '\n';
    f << "d_dev_mean_std," << format_double(rep.d_dev_mean) << ','
      << format_double(rep.d_dev_std) << '\n';
    f << "d_dev_within_threshold," << (rep.d_dev_mean <= dev_threshold ? 1 : 0) << ",\n";
    f << "offload_ratio_overall," << format_double(rep.offload_ratio_overall) << ",\n";
    for (std::size_t g = 0; g < rep.gd_success_ratio.size(); ++g)
        f << "gd" << g << "_success_ratio," << format_double(rep.gd_success_ratio[g]) << ",\n";
    for (std::size_t g = 0; g < rep.gd_share.size(); ++g)
        f << "gd" << g << "_attempt_share," << format_double(rep.gd_share[g]) << ",\n";
}

double vec_mean(const std::vector<double>& v) {
    if (v.empty()) return 0.0;
    double s = 0.0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
}

double vec_std(const std::vector<double>& v) {
    if (v.size() < 2) return 0.0;
    const double m = vec_mean(v);
    double s = 0.0;
    for (double x : v) s += (x - m) * (x - m);
    return std::sqrt(s / static_cast<double>(v.size()));
}

} // namespace uavei
