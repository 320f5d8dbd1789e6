#include <algorithm>
#include <cmath>
#include <filesystem>
#include <iostream>
#include <map>
#include <set>
#include <sstream>

#include "cli.hpp"
#include "json.hpp"
#include "pml/artifacts.hpp"
#include "pml/error.hpp"
#include "pml/io.hpp"
#include "pml/measure.hpp"
#include "svg.hpp"

namespace pml::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Artifact {
  std::string path;
  std::string kind;
  std::string domain;
  /// Hash of the field the artifact was computed from, when it names one.
  std::string field;
  json data;
};

std::string rel(const fs::path& p, const fs::path& root) { return fs::relative(p, root).generic_string(); }

std::string num(double v) { return format_double(v); }

std::string p_tag(double p) {
  std::string s = format_double(p);
  std::replace(s.begin(), s.end(), '.', '_');
  return s;
}

// Classifies a file; empty kind means "not an artifact".
Artifact classify(const fs::path& file, const fs::path& root) {
  Artifact a;
  a.path = rel(file, root);
  const std::string ext = file.extension().string();
  const std::string bytes = read_file(file.string());
  if (ext == ".json") {
    try {
      a.data = json::parse(bytes);
    } catch (const json::exception&) {
      return a;
    }
    if (!a.data.is_object()) return a;
    const std::string kind = a.data.value("kind", "");
    if (kind == "koch" || kind == "polygon" || kind == "regular_ngon") {
      a.kind = "domain";
      a.domain = a.data.value("domain_hash", "");
    } else if (a.data.contains("weighted_median")) {
      a.kind = "dimension";
      a.domain = a.data["provenance"].value("domain", "");
      a.field = a.data["provenance"].value("measure", "");
    } else if (!kind.empty() && a.data.contains("provenance")) {
      a.kind = kind;
      a.domain = a.data["provenance"].value("domain", "");
      a.field = a.data["provenance"].value("field", "");
    }
  } else if (ext == ".phf" || ext == ".cmf") {
    try {
      const json h = json::parse(snapshot_header(bytes));
      const std::string format = h.value("format", "");
      if (format == "pml-field") {
        a.kind = "field";
        a.domain = h.value("domain_hash", "");
        a.field = h.value("field_hash", "");
      } else if (format == "pml-map") {
        a.kind = "map";
        a.domain = h.value("domain_hash", "");
      }
    } catch (const std::exception&) {
    }
  } else if (ext == ".csv" && bytes.rfind("# pml boundary measure", 0) == 0) {
    const BoundaryMeasure mu = read_measure_csv(file.string());
    a.kind = "measure";
    a.domain = mu.domain ? hex64(mu.domain) : "";
    a.field = hex64(mu.provenance);
    a.data = {{"p", mu.p}, {"total", mu.total}, {"arcs", mu.size()}};
  }
  return a;
}

struct Verdict {
  std::string id;
  std::string source;
  std::string measured;
  std::string criterion;
  bool pass = false;
};

std::string csv_escape(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) out += c == '"' ? std::string("\"\"") : std::string(1, c);
  return out + "\"";
}

}  // namespace

void build_report(const std::string& dir, const std::string& out) {
  const fs::path root(dir);
  if (!fs::is_directory(root)) throw PreconditionError("report input " + dir + " is not a directory");
  const fs::path out_dir = fs::absolute(fs::path(out)).lexically_normal();

  std::vector<fs::path> files;
  for (const auto& e : fs::recursive_directory_iterator(root)) {
    if (!e.is_regular_file()) continue;
    const fs::path abs = fs::absolute(e.path()).lexically_normal();
    const auto [o, a] = std::mismatch(out_dir.begin(), out_dir.end(), abs.begin(), abs.end());
    if (o == out_dir.end()) continue;  // inside the output bundle
    files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());

  std::vector<Artifact> arts;
  for (const auto& f : files) {
    Artifact a = classify(f, root);
    if (!a.kind.empty()) arts.push_back(std::move(a));
  }
  if (arts.empty()) throw PreconditionError("no pml artifacts under " + dir);

  // Provenance: one domain per bundle, and every named field must be in the bundle when fields are.
  std::map<std::string, std::vector<std::string>> by_domain;
  std::set<std::string> fields;
  for (const auto& a : arts) {
    if (!a.domain.empty()) by_domain[a.domain].push_back(a.path);
    if (a.kind == "field") fields.insert(a.field);
  }
  if (by_domain.size() > 1) {
    std::ostringstream os;
    os << "mixed provenance: artifacts come from " << by_domain.size() << " domains (";
    bool first = true;
    for (const auto& [h, paths] : by_domain) {
      os << (first ? "" : "; ") << h << ": " << paths.front();
      first = false;
    }
    os << ")";
    throw PreconditionError(os.str());
  }
  for (const auto& a : arts) {
    if (!fields.empty() && a.kind != "field" && !a.field.empty() && !fields.count(a.field))
      throw PreconditionError("mixed provenance: " + a.path + " was computed from field " + a.field +
                              ", which is not in the bundle");
  }
  const std::string domain = by_domain.empty() ? "unknown" : by_domain.begin()->first;
  const std::string footer = "domain " + domain + " | " + std::to_string(arts.size()) + " artifacts from " + dir;

  std::map<std::string, std::string> outputs;
  std::vector<Verdict> verdicts;
  const std::string head = "# domain=" + domain + "\n";

  // Local dimension.
  {
    std::ostringstream csv;
    csv << head << "source,p,samples,weighted_median,q10,q25,q50,q75,q90\n";
    std::map<double, std::pair<double, std::string>> median_by_p;
    bool any = false;
    for (const auto& a : arts) {
      if (a.kind != "dimension") continue;
      any = true;
      const double p = a.data.value("p", 0.0);
      const double wm = a.data.value("weighted_median", 0.0);
      const auto& s = a.data["samples"];
      std::vector<double> slopes;
      for (const auto& x : s) slopes.push_back(x.value("slope", 0.0));
      csv << csv_escape(a.path) << "," << num(p) << "," << slopes.size() << "," << num(wm);
      for (const auto& [k, v] : a.data["weighted_quantiles"].items()) csv << "," << num(v.get<double>());
      csv << "\n";
      outputs["localdim_hist_p" + p_tag(p) + ".svg"] =
          svg::histogram(slopes, {"Local dimension, p = " + num(p), "slope of log mu(B(z,r)) vs log r (dimensionless)",
                                  "", footer});
      median_by_p[p] = {wm, a.path};
      if (p == 2.0) {
        const bool ok = wm >= 0.85 && wm <= 1.15 && slopes.size() >= 300;
        verdicts.push_back({"dimension.harmonic_baseline", a.path, num(wm) + " (" + std::to_string(slopes.size()) + " samples)",
                            "weighted median in [0.85, 1.15] with >= 300 samples", ok});
      }
    }
    if (!any) outputs["localdim_hist.svg"] = svg::histogram({}, {"Local dimension", "slope (dimensionless)", "", footer});
    for (const auto& [plo, lo] : median_by_p) {
      for (const auto& [phi, hi] : median_by_p) {
        if (plo < 2.0 && phi > 2.0) {
          verdicts.push_back({"dimension.dichotomy_direction", lo.second + " vs " + hi.second,
                              num(lo.first) + " - " + num(hi.first) + " = " + num(lo.first - hi.first),
                              "median(p < 2) - median(p > 2) >= 0.05", lo.first - hi.first >= 0.05});
        }
      }
    }
    outputs["dimension.csv"] = csv.str();
  }

  // Gradient ratio |grad u| d / u.
  {
    std::ostringstream csv;
    csv << head << "source,p,retained,min,max,max_over_min\n";
    bool any = false;
    for (const auto& a : arts) {
      if (a.kind != "theorem2") continue;
      any = true;
      const double p = a.data.value("p", 0.0), mn = a.data.value("min", 0.0), mx = a.data.value("max", 0.0);
      csv << csv_escape(a.path) << "," << num(p) << "," << a.data.value("retained", 0) << "," << num(mn) << ","
          << num(mx) << "," << num(mx / mn) << "\n";
      outputs["theorem2_hist_p" + p_tag(p) + ".svg"] = svg::histogram(
          a.data["values"].get<std::vector<double>>(),
          {"Gradient ratio |grad u| d / u, p = " + num(p), "R(z) (dimensionless)", "", footer});
      verdicts.push_back({"fem.theorem2_ratio_range", a.path, num(mx / mn), "max / min <= 50", mx / mn <= 50.0});
    }
    if (!any) outputs["theorem2_hist.svg"] = svg::histogram({}, {"Gradient ratio", "R(z) (dimensionless)", "", footer});
    outputs["theorem2.csv"] = csv.str();
  }

  // Level flux.
  {
    std::ostringstream csv;
    csv << head << "source,p,t,flux\n";
    std::vector<svg::Series> series;
    for (const auto& a : arts) {
      if (a.kind != "flux") continue;
      const double p = a.data.value("p", 0.0);
      svg::Series s{"p = " + num(p), a.data["t"].get<std::vector<double>>(), a.data["flux"].get<std::vector<double>>(), true};
      for (std::size_t i = 0; i < s.x.size(); ++i) csv << csv_escape(a.path) << "," << num(p) << "," << num(s.x[i]) << "," << num(s.y[i]) << "\n";
      series.push_back(std::move(s));
      const double spread = a.data.value("spread", 0.0);
      bool ok = spread <= 0.03;
      std::string measured = "spread " + num(spread);
      if (a.data.contains("total_deviation")) {
        const double dev = a.data["total_deviation"].get<double>();
        ok = ok && dev <= 0.02;
        measured += ", deviation from total " + num(dev);
      }
      verdicts.push_back({"measure.level_flux_conservation", a.path, measured,
                          "spread <= 0.03 and deviation from the measure total <= 0.02", ok});
    }
    outputs["level_flux.svg"] = svg::plot(series, {"Level-set flux", "level t", "flux of |grad u|^(p-1) (length units^(2-p))", footer});
    outputs["flux.csv"] = csv.str();
  }

  // Koebe ratios.
  {
    std::ostringstream csv;
    csv << head << "source,z_re,z_im,ratio\n";
    std::vector<svg::Series> series;
    for (const auto& a : arts) {
      if (a.kind != "koebe") continue;
      svg::Series s{a.path, {}, {}, false};
      for (const auto& row : a.data["samples"]) {
        const double x = row[0][0].get<double>(), y = row[0][1].get<double>(), r = row[1].get<double>();
        s.x.push_back(std::hypot(x, y));
        s.y.push_back(r);
        csv << csv_escape(a.path) << "," << num(x) << "," << num(y) << "," << num(r) << "\n";
      }
      series.push_back(std::move(s));
      verdicts.push_back({"conformal.koebe_sandwich", a.path,
                          "[" + num(a.data.value("min", 0.0)) + ", " + num(a.data.value("max", 0.0)) + "]",
                          "all ratios in [0.225, 1.1]", a.data.value("pass", false)});
    }
    outputs["koebe_scatter.svg"] =
        svg::plot(series, {"Koebe ratios", "|z| in the unit disk (dimensionless)", "d(f(z)) / (|f'(z)| (1 - |z|^2))", footer});
    outputs["koebe.csv"] = csv.str();
  }

  // Metric sandwich.
  {
    std::ostringstream csv;
    csv << head << "source,rho,Q,pass\n";
    for (const auto& a : arts) {
      if (a.kind != "sandwich") continue;
      for (const auto& row : a.data["pairs"])
        csv << csv_escape(a.path) << "," << num(row["rho"].get<double>()) << "," << num(row["Q"].get<double>()) << ","
            << (row["pass"].get<bool>() ? 1 : 0) << "\n";
      verdicts.push_back({"conformal.metric_sandwich", a.path,
                          "Q / rho in [" + num(a.data.value("min_Q_over_rho", 0.0)) + ", " +
                              num(a.data.value("max_Q_over_rho", 0.0)) + "]",
                          "rho <= Q <= 4.8 rho", a.data.value("pass", false)});
    }
    outputs["sandwich.csv"] = csv.str();
  }

  // Cigar paths and shifted boxes.
  {
    std::ostringstream csv;
    csv << head << "source,level,anchor_re,anchor_im,distance,decay\n";
    std::vector<svg::Series> series;
    for (const auto& a : arts) {
      if (a.kind != "cigar") continue;
      const auto& p = a.data["path"];
      const auto anchors = p["anchors"];
      const auto dists = p["distances"].get<std::vector<double>>();
      const auto decay = p["decay"].get<std::vector<double>>();
      for (std::size_t k = 0; k < anchors.size(); ++k)
        csv << csv_escape(a.path) << "," << k << "," << num(anchors[k][0].get<double>()) << ","
            << num(anchors[k][1].get<double>()) << "," << num(dists[k]) << "," << (k ? num(decay[k - 1]) : "") << "\n";
      if (series.empty() && a.data.contains("outline")) {
        svg::Series o{"domain", {}, {}, true};
        for (const auto& v : a.data["outline"]) {
          o.x.push_back(v[0].get<double>());
          o.y.push_back(v[1].get<double>());
        }
        if (!o.x.empty()) {
          o.x.push_back(o.x.front());
          o.y.push_back(o.y.front());
        }
        series.push_back(std::move(o));
      }
      svg::Series tau{"cigar path", {}, {}, true};
      for (const auto& z : p["image"]) {
        tau.x.push_back(z[0].get<double>());
        tau.y.push_back(z[1].get<double>());
      }
      series.push_back(std::move(tau));
      const double worst = decay.empty() ? 0.0 : *std::max_element(decay.begin(), decay.end());
      const std::size_t levels = p.value("levels", 0);
      verdicts.push_back({"conformal.cigar_decay", a.path, std::to_string(levels) + " levels, worst decay " + num(worst),
                          ">= 6 levels with every decay <= 0.5", levels >= 6 && worst <= 0.5});
      const double c3 = p.value("cigar_constant", 0.0);
      verdicts.push_back({"conformal.cigar_property", a.path, "C3 = " + num(c3), "C3 finite", std::isfinite(c3) && c3 > 0.0});
      if (a.data.contains("shifted_box")) {
        const auto& b = a.data["shifted_box"];
        const double lr = b.value("length_ratio", 0.0), wr = b.value("w0_distance_ratio", 0.0);
        verdicts.push_back({"conformal.shifted_box", a.path, "H1(sigma)/d = " + num(lr) + ", d(w0, sigma)/d = " + num(wr),
                            "H1(sigma)/d <= 20 and d(w0, sigma)/d >= 1e-3", lr <= 20.0 && wr >= 1e-3});
        svg::Series sg{"sigma", {}, {}, true};
        for (const auto& z : b["sigma"]) {
          sg.x.push_back(z[0].get<double>());
          sg.y.push_back(z[1].get<double>());
        }
        series.push_back(std::move(sg));
      }
    }
    svg::Frame f{"Cigar path over the domain", "x (length units)", "y (length units)", footer};
    f.equal_aspect = true;
    outputs["cigar_overlay.svg"] = svg::plot(series, f);
    outputs["cigar.csv"] = csv.str();
  }

  // Half-level searches.
  {
    std::ostringstream csv;
    csv << head << "source,p,z1_re,z1_im,u1,z_star_re,z_star_im,u_star,rho,error\n";
    for (const auto& a : arts) {
      if (a.kind != "lemma47") continue;
      const double p = a.data.value("p", 0.0);
      for (const auto& r : a.data["samples"]) {
        csv << csv_escape(a.path) << "," << num(p) << "," << num(r["z1"][0].get<double>()) << ","
            << num(r["z1"][1].get<double>()) << ",";
        if (r.contains("error")) {
          csv << ",,,,," << csv_escape(r["error"].get<std::string>()) << "\n";
        } else {
          csv << num(r["u1"].get<double>()) << "," << num(r["z_star"][0].get<double>()) << ","
              << num(r["z_star"][1].get<double>()) << "," << num(r["u_star"].get<double>()) << ","
              << num(r["rho"].get<double>()) << ",\n";
        }
      }
      const std::size_t failures = a.data.value("failures", 0);
      const double c = a.data.value("C_hat", 0.0);
      verdicts.push_back({"conformal.lemma47_search", a.path,
                          std::to_string(failures) + " failures, C_hat = " + num(c), "every search succeeds, C_hat finite",
                          failures == 0 && std::isfinite(c)});
    }
    outputs["lemma47.csv"] = csv.str();
  }

  {
    std::ostringstream csv;
    csv << head << "id,source,measured,criterion,pass\n";
    for (const auto& v : verdicts)
      csv << v.id << "," << csv_escape(v.source) << "," << csv_escape(v.measured) << "," << csv_escape(v.criterion) << ","
          << (v.pass ? "PASS" : "FAIL") << "\n";
    outputs["verdicts.csv"] = csv.str();
  }
  {
    std::ostringstream csv;
    csv << head << "file,kind,domain,field,fnv1a\n";
    for (const auto& a : arts)
      csv << csv_escape(a.path) << "," << a.kind << "," << a.domain << "," << a.field << ","
          << hex64(fnv1a(read_file((root / a.path).string()))) << "\n";
    outputs["manifest.csv"] = csv.str();
  }

  for (const auto& [name, content] : outputs) atomic_write((fs::path(out) / name).string(), content);
  std::size_t passed = 0;
  for (const auto& v : verdicts) passed += v.pass;
  std::cout << "report: " << arts.size() << " artifacts, " << outputs.size() << " files in " << out << "; "
            << passed << "/" << verdicts.size() << " verdicts pass\n";
}

}  // namespace pml::cli
