#include "psicalc/io.hpp"

#include <ostream>

#include <json.hpp>

namespace psicalc {

using nlohmann::json;

std::string symbol_to_json(const ClassicalSymbol& p) {
  const auto& m = *p.manifold();
  json doc;
  doc["format"] = "psicalc-symbol";
  doc["version"] = 1;
  doc["manifold"] = {{"dim", m.dim()}, {"grid", m.grid()}, {"directions", m.directions()}};
  doc["fiber"] = p.fiber();
  json terms = json::array();
  const int f = p.fiber();
  for (const auto& t : p.terms()) {
    std::vector<double> re;
    std::vector<double> im;
    re.reserve(static_cast<std::size_t>(m.points() * m.directions() * f * f));
    im.reserve(re.capacity());
    for (int pt = 0; pt < m.points(); ++pt) {
      for (int d = 0; d < m.directions(); ++d) {
        const Mat v = t.value(pt, d);
        for (int r = 0; r < f; ++r) {
          for (int c = 0; c < f; ++c) {
            re.push_back(v(r, c).real());
            im.push_back(v(r, c).imag());
          }
        }
      }
    }
    terms.push_back({{"degree", t.degree()}, {"re", std::move(re)}, {"im", std::move(im)}});
  }
  doc["terms"] = std::move(terms);
  return doc.dump();
}

ClassicalSymbol symbol_from_json(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::exception& e) {
    throw RejectedInput(std::string("symbol record: ") + e.what());
  }
  if (doc.value("format", "") != "psicalc-symbol" || doc.value("version", 0) != 1) {
    throw RejectedInput("symbol record: unknown format or version");
  }
  try {
    const auto& mj = doc.at("manifold");
    const int dim = mj.at("dim").get<int>();
    const int grid = mj.at("grid").get<int>();
    const ManifoldPtr m = dim == 1 ? ModelManifold::circle(grid) : ModelManifold::torus(grid, mj.at("directions").get<int>());
    const int f = doc.at("fiber").get<int>();
    std::vector<HomogeneousTerm> terms;
    for (const auto& tj : doc.at("terms")) {
      const auto re = tj.at("re").get<std::vector<double>>();
      const auto im = tj.at("im").get<std::vector<double>>();
      const std::size_t need = static_cast<std::size_t>(m->points() * m->directions() * f * f);
      if (re.size() != need || im.size() != need) throw ShapeMismatch("symbol record: sample count does not match the grid");
      HomogeneousTerm t(m, tj.at("degree").get<int>(), f);
      std::size_t i = 0;
      for (int pt = 0; pt < m->points(); ++pt) {
        for (int d = 0; d < m->directions(); ++d) {
          Mat v(f, f);
          for (int r = 0; r < f; ++r) {
            for (int c = 0; c < f; ++c, ++i) v(r, c) = cd(re[i], im[i]);
          }
          t.set_sample(0, pt, d, v);
        }
      }
      terms.push_back(std::move(t));
    }
    if (terms.empty()) throw RejectedInput("symbol record: no terms");
    return ClassicalSymbol(std::move(terms));
  } catch (const json::exception& e) {
    throw RejectedInput(std::string("symbol record: ") + e.what());
  }
}

void export_symbol(const ClassicalSymbol& p, std::ostream& out) { out << symbol_to_json(p) << '\n'; }

}  // namespace psicalc
