#include "hemera/report.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <map>

#include "hemera/error.hpp"
#include "text_util.hpp"

namespace hemera {

namespace {

bool keeps(const AttributionRecord& r, AttributionSign sign) {
  return sign == AttributionSign::Positive ? r.mean_attribution > 0.0 : r.mean_attribution < 0.0;
}

// Strongest first, then (position, token) ascending.
bool stronger(const AttributionRecord& a, const AttributionRecord& b, AttributionSign sign) {
  if (a.mean_attribution != b.mean_attribution)
    return sign == AttributionSign::Positive ? a.mean_attribution > b.mean_attribution
                                             : a.mean_attribution < b.mean_attribution;
  if (a.chromosome != b.chromosome) return a.chromosome < b.chromosome;
  if (a.position != b.position) return a.position < b.position;
  return a.token < b.token;
}

AttributionTable top_k(AttributionTable candidates, std::size_t k, AttributionSign sign) {
  std::sort(candidates.begin(), candidates.end(),
            [sign](const auto& a, const auto& b) { return stronger(a, b, sign); });
  if (candidates.size() > k) candidates.resize(k);
  return candidates;
}

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

AttributionTable top_k_per_chromosome(const AttributionTable& table, std::size_t k, AttributionSign sign) {
  if (k < 1) throw Error(ErrorCode::ConfigInvalid, "k must be at least 1");
  std::map<int, AttributionTable> by_chromosome;
  for (const auto& r : table)
    if (keeps(r, sign)) by_chromosome[r.chromosome].push_back(r);
  AttributionTable out;
  for (auto& [chrom, records] : by_chromosome) {
    auto best = top_k(std::move(records), k, sign);
    out.insert(out.end(), best.begin(), best.end());
  }
  return out;
}

AttributionTable top_k_overall(const AttributionTable& table, std::size_t k, AttributionSign sign) {
  if (k < 1) throw Error(ErrorCode::ConfigInvalid, "k must be at least 1");
  AttributionTable candidates;
  for (const auto& r : table)
    if (keeps(r, sign)) candidates.push_back(r);
  return top_k(std::move(candidates), k, sign);
}

std::vector<LocusMatch> proximity_match(const AttributionTable& records, const KnownLociList& known,
                                        std::int64_t window) {
  if (window <= 0) throw Error(ErrorCode::ConfigInvalid, "window must be positive");
  std::map<int, std::vector<const KnownLocus*>> by_chromosome;
  for (const auto& k : known) by_chromosome[k.chromosome].push_back(&k);

  std::vector<LocusMatch> matches;
  for (const auto& r : records) {
    const auto it = by_chromosome.find(r.chromosome);
    if (it == by_chromosome.end()) continue;
    for (const auto* k : it->second) {
      const std::int64_t distance = r.position > k->position ? r.position - k->position : k->position - r.position;
      if (distance <= window) matches.push_back({r.chromosome, r.position, k->position, k->source, distance});
    }
  }
  std::sort(matches.begin(), matches.end(), [](const LocusMatch& a, const LocusMatch& b) {
    return std::tie(a.chromosome, a.attributed_position, a.known_position, a.source) <
           std::tie(b.chromosome, b.attributed_position, b.known_position, b.source);
  });
  // Several tokens at one position collapse to one match per locus.
  matches.erase(std::unique(matches.begin(), matches.end()), matches.end());
  return matches;
}

void write_matches(std::span<const LocusMatch> matches, const std::filesystem::path& path) {
  auto out = detail::open_output(path);
  out << "chrom\tattr_pos\tknown_pos\tsource\tdistance\n";
  for (const auto& m : matches)
    out << m.chromosome << '\t' << m.attributed_position << '\t' << m.known_position << '\t' << m.source << '\t'
        << m.distance << '\n';
  detail::check_written(out, path);
}

std::vector<ManhattanPoint> manhattan_points(const AttributionTable& table, std::optional<AttributionSign> filter) {
  // Offsets come from the whole table so positive and negative views share
  // one x axis.
  std::map<int, std::int64_t> max_position;
  for (const auto& r : table) {
    auto& m = max_position[r.chromosome];
    m = std::max(m, r.position);
  }
  std::map<int, std::pair<std::int64_t, int>> layout;  // chromosome -> (offset, band)
  std::int64_t offset = 0;
  int band = 0;
  for (const auto& [chrom, max_pos] : max_position) {
    layout[chrom] = {offset, band};
    offset += max_pos;
    band = 1 - band;
  }

  AttributionTable sorted = table;
  std::sort(sorted.begin(), sorted.end(), [](const auto& a, const auto& b) {
    return std::tie(a.chromosome, a.position, a.token) < std::tie(b.chromosome, b.position, b.token);
  });
  std::vector<ManhattanPoint> points;
  for (const auto& r : sorted) {
    if (filter && !keeps(r, *filter)) continue;
    const auto [chrom_offset, chrom_band] = layout.at(r.chromosome);
    points.push_back({chrom_offset + r.position, r.chromosome, r.position, r.token, r.mean_attribution, chrom_band});
  }
  return points;
}

void write_manhattan(std::span<const ManhattanPoint> points, const std::filesystem::path& path) {
  auto out = detail::open_output(path);
  out << "cumulative_x\tchrom\tpos\ttoken_id\tattribution\tcolor_band\n";
  for (const auto& p : points)
    out << p.cumulative_x << '\t' << p.chromosome << '\t' << p.position << '\t' << static_cast<int>(p.token) << '\t'
        << format_double(p.attribution) << '\t' << p.color_band << '\n';
  detail::check_written(out, path);
}

void write_manhattan_svg(std::span<const ManhattanPoint> points, const std::filesystem::path& path,
                         const std::string& title) {
  constexpr double width = 1200.0, height = 480.0, margin = 50.0;
  auto out = detail::open_output(path);
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height << "\">\n";
  out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  out << "<text x=\"" << margin << "\" y=\"25\" font-family=\"sans-serif\" font-size=\"16\">" << title << "</text>\n";
  if (!points.empty()) {
    std::int64_t x_max = 1;
    double y_min = 0.0, y_max = 0.0;
    for (const auto& p : points) {
      x_max = std::max(x_max, p.cumulative_x);
      y_min = std::min(y_min, p.attribution);
      y_max = std::max(y_max, p.attribution);
    }
    if (y_max == y_min) y_max = y_min + 1.0;
    auto sx = [&](std::int64_t x) { return margin + (width - 2 * margin) * static_cast<double>(x) / x_max; };
    auto sy = [&](double y) { return height - margin - (height - 2 * margin) * (y - y_min) / (y_max - y_min); };
    out << "<line x1=\"" << margin << "\" y1=\"" << sy(0.0) << "\" x2=\"" << width - margin << "\" y2=\"" << sy(0.0)
        << "\" stroke=\"#999\"/>\n";
    const char* colors[2] = {"#1f4e79", "#7fa7d1"};
    for (const auto& p : points)
      out << "<circle cx=\"" << sx(p.cumulative_x) << "\" cy=\"" << sy(p.attribution) << "\" r=\"2\" fill=\""
          << colors[p.color_band] << "\"/>\n";
  }
  out << "</svg>\n";
  detail::check_written(out, path);
}

}  // namespace hemera
