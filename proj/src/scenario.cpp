#include "patchkit/scenario.hpp"

#include <cmath>
#include <fstream>
#include <numbers>

namespace patchkit {

namespace {

// Single source of defaults; scenarios/schema.json mirrors this document.
const char* kSchemaText = R"JSON({
  "format": "patchkit-scenario-v1",
  "fields": {
    "name":            {"type": "string", "default": "unnamed", "doc": "scenario label"},
    "system":          {"type": "object", "doc": "control system", "fields": {
      "name":          {"type": "string", "default": "single-integrator", "doc": "single-integrator | linear-stable | unicycle"},
      "directions":    {"type": "int",    "default": 16,    "doc": "number of unit control directions (planar systems)"},
      "include_zero":  {"type": "bool",   "default": true,  "doc": "add the zero control value"},
      "speeds":        {"type": "array",  "default": [0.5, 1.0], "doc": "unicycle speed grid"},
      "turn_rates":    {"type": "array",  "default": [-1.0, 0.0, 1.0], "doc": "unicycle turn-rate grid"}
    }},
    "constraint":      {"type": "object", "doc": "state constraint set: {type: box|ball|polygon, ...}; optional clip_radius bounds an unbounded set by a regular 16-gon"},
    "target":          {"type": "object", "doc": "target set: {type: point|ball|polygon}"},
    "delta":           {"type": "real",   "default": 0.2,   "doc": "practical-stabilization radius"},
    "gamma":           {"type": "real",   "default": -1.0,  "doc": "tube tolerance; -1 means delta/4 (keeps 4*gamma <= delta)"},
    "eps_dec":         {"type": "real",   "default": 1.0,   "doc": "expected crown decrease rate for the probe"},
    "tol_bd":          {"type": "real",   "default": 1e-7,  "doc": "boundary tolerance"},
    "tol_act":         {"type": "real",   "default": 1e-7,  "doc": "face activity tolerance"},
    "hypotheses":      {"type": "object", "fields": {
      "n_boundary":    {"type": "int",    "default": 256,   "doc": "boundary samples for (S1)/(S2)"}
    }},
    "planner":         {"type": "object", "fields": {
      "dwell":         {"type": "real",   "default": 0.1,   "doc": "dwell time per control piece"},
      "horizon":       {"type": "real",   "default": 10.0,  "doc": "planning horizon"},
      "node_budget":   {"type": "int",    "default": 200000, "doc": "search node budget"}
    }},
    "synthesis":       {"type": "object", "fields": {
      "lambda":        {"type": "real",   "default": 0.5,   "doc": "patch diameter cap"},
      "boundary_style":{"type": "string", "default": "slab", "doc": "slab | wedge"},
      "depth_target":  {"type": "real",   "default": -1.0,  "doc": "crown depth to cover; -1 means 2*gamma"},
      "band_thickness":{"type": "real",   "default": 0.03,  "doc": "slab band thickness"},
      "outer_reach":   {"type": "real",   "default": 0.02,  "doc": "slab reach above its band"},
      "wall_tilt":     {"type": "real",   "default": 2.0,   "doc": "slab wall slope"},
      "tube_growth":   {"type": "real",   "default": 0.05,  "doc": "tube radius growth added to L_f"},
      "cover_pitch":   {"type": "real",   "default": 0.015, "doc": "tube-coverage sample pitch"},
      "max_tubes":     {"type": "int",    "default": 4000,  "doc": "tube budget"}
    }},
    "simulation":      {"type": "object", "fields": {
      "dt":            {"type": "real",   "default": 0.01,  "doc": "integration step"},
      "t_max":         {"type": "real",   "default": 20.0,  "doc": "simulation horizon"},
      "grid_n":        {"type": "int",    "default": 10,    "doc": "initial-state grid per axis"}
    }},
    "seed":            {"type": "int",    "default": 1,     "doc": "RNG seed for all sampled checks"}
  }
})JSON";

Json schema_default(const Json& schema, std::initializer_list<const char*> path) {
  const Json* node = &schema.at("fields");
  const char* last = nullptr;
  for (const char* key : path) {
    if (last) node = &node->at(last).at("fields");
    last = key;
  }
  return node->at(last).at("default");
}

Vec to_vec(const Json& j) {
  Vec v(j.size());
  for (std::size_t i = 0; i < j.size(); ++i) v[i] = j[i].get<double>();
  return v;
}

Json from_vec(const Vec& v) {
  Json j = Json::array();
  for (int i = 0; i < v.size(); ++i) j.push_back(v[i]);
  return j;
}

Region clip_by_ngon(const Region& r, double radius) {
  if (!r.is_polytope())
    throw std::runtime_error("clip_radius supports polytope constraints only");
  auto faces = r.as_polytope().faces;
  for (int k = 0; k < 16; ++k) {
    double a = 2 * std::numbers::pi * k / 16;
    Vec n(2);
    n << std::cos(a), std::sin(a);
    faces.push_back({n, radius});
  }
  return Region::polytope(std::move(faces));
}

}  // namespace

const Json& scenario_schema() {
  static const Json schema = Json::parse(kSchemaText);
  return schema;
}

Json region_to_json(const Region& r) {
  Json j;
  if (r.is_polytope()) {
    j["type"] = "polygon";
    Json faces = Json::array();
    for (const auto& f : r.as_polytope().faces)
      faces.push_back({{"normal", from_vec(f.normal)}, {"offset", f.offset}});
    j["faces"] = faces;
  } else if (r.is_ball()) {
    j["type"] = "ball";
    j["center"] = from_vec(r.as_ball().center);
    j["radius"] = r.as_ball().radius;
  } else if (r.is_empty()) {
    j["type"] = "empty";
    j["dim"] = r.dim();
  } else {
    throw std::runtime_error("region_to_json: oracle sets are not serializable");
  }
  return j;
}

Region region_from_json(const Json& j) {
  const std::string type = j.at("type").get<std::string>();
  if (type == "box") return Region::box(to_vec(j.at("lo")), to_vec(j.at("hi")));
  if (type == "ball") return Region::ball(to_vec(j.at("center")), j.at("radius").get<double>());
  if (type == "point") return Region::ball(to_vec(j.at("at")), 0.0);
  if (type == "polygon") {
    std::vector<Halfspace> faces;
    for (const auto& f : j.at("faces"))
      faces.push_back({to_vec(f.at("normal")), f.at("offset").get<double>()});
    return Region::polytope(std::move(faces));
  }
  if (type == "empty") return Region::empty(j.at("dim").get<int>());
  throw std::runtime_error("region_from_json: unknown type " + type);
}

Scenario Scenario::from_json(const Json& j) {
  const Json& schema = scenario_schema();
  auto get_or = [&](const Json& obj, const char* key, const Json& fallback) {
    return obj.contains(key) ? obj.at(key) : fallback;
  };
  Scenario sc;
  sc.name = get_or(j, "name", schema_default(schema, {"name"})).get<std::string>();
  Json sys = get_or(j, "system", Json::object());
  sc.system_name =
      get_or(sys, "name", schema_default(schema, {"system", "name"})).get<std::string>();
  sc.n_dirs = get_or(sys, "directions", schema_default(schema, {"system", "directions"})).get<int>();
  sc.include_zero =
      get_or(sys, "include_zero", schema_default(schema, {"system", "include_zero"})).get<bool>();
  for (const auto& v : get_or(sys, "speeds", schema_default(schema, {"system", "speeds"})))
    sc.unicycle_speeds.push_back(v.get<double>());
  for (const auto& v : get_or(sys, "turn_rates", schema_default(schema, {"system", "turn_rates"})))
    sc.unicycle_turn_rates.push_back(v.get<double>());

  if (!j.contains("constraint")) throw std::runtime_error("scenario: missing constraint");
  sc.constraint = region_from_json(j.at("constraint"));
  if (j.at("constraint").contains("clip_radius"))
    sc.constraint = clip_by_ngon(sc.constraint, j.at("constraint").at("clip_radius").get<double>());
  if (!j.contains("target")) throw std::runtime_error("scenario: missing target");
  sc.target = region_from_json(j.at("target"));

  sc.delta = get_or(j, "delta", schema_default(schema, {"delta"})).get<double>();
  sc.gamma = get_or(j, "gamma", schema_default(schema, {"gamma"})).get<double>();
  if (sc.gamma <= 0) sc.gamma = sc.delta / 4.0;
  if (4 * sc.gamma > sc.delta + 1e-12)
    throw std::runtime_error("scenario: 4*gamma <= delta violated");
  sc.eps_dec = get_or(j, "eps_dec", schema_default(schema, {"eps_dec"})).get<double>();
  sc.tol_bd = get_or(j, "tol_bd", schema_default(schema, {"tol_bd"})).get<double>();
  sc.tol_act = get_or(j, "tol_act", schema_default(schema, {"tol_act"})).get<double>();
  if (sc.tol_bd <= 0 || sc.tol_act <= 0 || sc.delta <= 0)
    throw std::runtime_error("scenario: tolerances must be positive");

  Json hyp = get_or(j, "hypotheses", Json::object());
  sc.n_boundary =
      get_or(hyp, "n_boundary", schema_default(schema, {"hypotheses", "n_boundary"})).get<int>();

  Json pl = get_or(j, "planner", Json::object());
  sc.dwell = get_or(pl, "dwell", schema_default(schema, {"planner", "dwell"})).get<double>();
  sc.horizon = get_or(pl, "horizon", schema_default(schema, {"planner", "horizon"})).get<double>();
  sc.node_budget =
      get_or(pl, "node_budget", schema_default(schema, {"planner", "node_budget"})).get<int>();

  Json sy = get_or(j, "synthesis", Json::object());
  sc.lambda = get_or(sy, "lambda", schema_default(schema, {"synthesis", "lambda"})).get<double>();
  sc.boundary_style =
      get_or(sy, "boundary_style", schema_default(schema, {"synthesis", "boundary_style"}))
          .get<std::string>();
  sc.depth_target =
      get_or(sy, "depth_target", schema_default(schema, {"synthesis", "depth_target"}))
          .get<double>();
  if (sc.depth_target <= 0) sc.depth_target = 2 * sc.gamma;
  sc.band_thickness =
      get_or(sy, "band_thickness", schema_default(schema, {"synthesis", "band_thickness"}))
          .get<double>();
  sc.outer_reach =
      get_or(sy, "outer_reach", schema_default(schema, {"synthesis", "outer_reach"})).get<double>();
  sc.wall_tilt =
      get_or(sy, "wall_tilt", schema_default(schema, {"synthesis", "wall_tilt"})).get<double>();
  sc.tube_growth =
      get_or(sy, "tube_growth", schema_default(schema, {"synthesis", "tube_growth"})).get<double>();
  sc.cover_pitch =
      get_or(sy, "cover_pitch", schema_default(schema, {"synthesis", "cover_pitch"})).get<double>();
  sc.max_tubes = get_or(sy, "max_tubes", schema_default(schema, {"synthesis", "max_tubes"})).get<int>();

  Json sim = get_or(j, "simulation", Json::object());
  sc.dt = get_or(sim, "dt", schema_default(schema, {"simulation", "dt"})).get<double>();
  sc.t_max = get_or(sim, "t_max", schema_default(schema, {"simulation", "t_max"})).get<double>();
  sc.grid_n = get_or(sim, "grid_n", schema_default(schema, {"simulation", "grid_n"})).get<int>();
  if (sc.dt <= 0 || sc.t_max <= 0) throw std::runtime_error("scenario: dt and t_max must be positive");

  sc.seed = get_or(j, "seed", schema_default(schema, {"seed"})).get<std::uint64_t>();
  return sc;
}

Scenario Scenario::from_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("scenario: cannot open " + path);
  Json j;
  try {
    j = Json::parse(in);
  } catch (const Json::parse_error& e) {
    throw std::runtime_error(std::string("scenario: parse error: ") + e.what());
  }
  return from_json(j);
}

ControlSystem Scenario::build_system() const {
  if (system_name == "single-integrator") return make_single_integrator(n_dirs, include_zero);
  if (system_name == "linear-stable") return make_linear_stable(n_dirs, include_zero);
  if (system_name == "unicycle") return make_unicycle(unicycle_speeds, unicycle_turn_rates);
  throw std::runtime_error("scenario: unknown system " + system_name);
}

std::vector<Vec> Scenario::initial_grid() const {
  auto [lo, hi] = constraint.bounding_box();
  const int d = constraint.dim();
  std::vector<Vec> out;
  std::vector<int> idx(d, 0);
  while (true) {
    Vec p(d);
    for (int i = 0; i < d; ++i)
      p[i] = grid_n == 1 ? 0.5 * (lo[i] + hi[i])
                         : lo[i] + (hi[i] - lo[i]) * idx[i] / (grid_n - 1);
    if (constraint.contains(p, tol_bd) && target.distance_to(p) > delta) out.push_back(p);
    int i = 0;
    while (i < d && ++idx[i] >= grid_n) idx[i++] = 0;
    if (i == d) break;
  }
  return out;
}

BoundaryFeedbackConfig Scenario::boundary_config() const {
  BoundaryFeedbackConfig cfg;
  cfg.lambda = lambda;
  cfg.style = boundary_style == "wedge" ? BoundaryStyle::Wedge : BoundaryStyle::Slab;
  cfg.depth_target = depth_target;
  cfg.band_thickness = band_thickness;
  cfg.outer_reach = outer_reach;
  cfg.wall_tilt = wall_tilt;
  cfg.seed = seed;
  cfg.cert.seed = seed ^ 0x9e37ull;
  return cfg;
}

// ---------------------------------------------------------------------------
// Feedback serialization

namespace {

Json domain_to_json(const PatchDomain& dom) {
  Json j;
  if (const auto* w = std::get_if<WedgeDomain>(&dom.shape)) {
    j["type"] = "wedge";
    j["apex"] = from_vec(w->apex);
    j["axis"] = from_vec(w->axis);
    j["radius"] = w->radius;
    j["beta"] = w->beta;
    j["clip_depth"] = w->clip_depth;
  } else if (const auto* s = std::get_if<SlabDomain>(&dom.shape)) {
    j["type"] = "slab";
    j["arc_center"] = s->arc_center;
    j["half_len"] = s->half_len;
    j["depth_lo"] = s->depth_lo;
    j["depth_hi"] = s->depth_hi;
    j["wall_tilt"] = s->wall_tilt;
  } else if (const auto* t = std::get_if<TubeDomain>(&dom.shape)) {
    j["type"] = "tube";
    Json knots = Json::array(), radii = Json::array(), times = Json::array();
    for (const Vec& k : t->knots) knots.push_back(from_vec(k));
    for (double r : t->radii) radii.push_back(r);
    for (double t2 : t->times) times.push_back(t2);
    j["knots"] = knots;
    j["radii"] = radii;
    j["times"] = times;
  } else {
    const auto& b = std::get<BallDomain>(dom.shape);
    j["type"] = "ball";
    j["center"] = from_vec(b.center);
    j["radius"] = b.radius;
  }
  return j;
}

PatchDomain domain_from_json(const Json& j) {
  PatchDomain dom;
  const std::string type = j.at("type").get<std::string>();
  if (type == "wedge") {
    dom.shape = WedgeDomain{to_vec(j.at("apex")), to_vec(j.at("axis")),
                            j.at("radius").get<double>(), j.at("beta").get<double>(),
                            j.at("clip_depth").get<double>()};
  } else if (type == "slab") {
    dom.shape = SlabDomain{j.at("arc_center").get<double>(), j.at("half_len").get<double>(),
                           j.at("depth_lo").get<double>(), j.at("depth_hi").get<double>(),
                           j.at("wall_tilt").get<double>()};
  } else if (type == "tube") {
    TubeDomain t;
    for (const auto& k : j.at("knots")) t.knots.push_back(to_vec(k));
    for (const auto& r : j.at("radii")) t.radii.push_back(r.get<double>());
    if (j.contains("times"))
      for (const auto& t2 : j.at("times")) t.times.push_back(t2.get<double>());
    dom.shape = std::move(t);
  } else if (type == "ball") {
    dom.shape = BallDomain{to_vec(j.at("center")), j.at("radius").get<double>()};
  } else {
    throw std::runtime_error("domain_from_json: unknown type " + type);
  }
  return dom;
}

}  // namespace

Json feedback_to_json(const PatchyFeedback& fb, const Json& provenance_meta) {
  Json j;
  j["format"] = "patchkit-feedback-v1";
  j["dimension"] = fb.constraint().dim();
  j["constraint"] = region_to_json(fb.constraint());
  if (fb.target_mask()) {
    j["target"] = region_to_json(*fb.target_mask());
    j["mask_radius"] = fb.mask_radius();
  }
  j["gamma"] = fb.gamma;
  j["crown_depth"] = fb.crown_depth;
  j["inward_margin"] = fb.inward_margin;
  j["n_boundary_patches"] = fb.n_boundary_patches;
  j["meta"] = provenance_meta;
  Json patches = Json::array();
  for (const Patch& p : fb.patches()) {
    Json pj;
    pj["control"] = p.control_index;
    pj["provenance"] = p.provenance;
    pj["domain"] = domain_to_json(p.domain);
    patches.push_back(pj);
  }
  j["patches"] = patches;
  return j;
}

PatchyFeedback feedback_from_json(const Json& j) {
  Region S = region_from_json(j.at("constraint"));
  std::vector<Patch> patches;
  for (const auto& pj : j.at("patches")) {
    Patch p;
    p.control_index = pj.at("control").get<int>();
    p.provenance = pj.at("provenance").get<std::string>();
    p.domain = domain_from_json(pj.at("domain"));
    patches.push_back(std::move(p));
  }
  PatchyFeedback fb(std::move(S), std::move(patches));
  if (j.contains("target"))
    fb.set_target_mask(region_from_json(j.at("target")), j.at("mask_radius").get<double>());
  fb.gamma = j.value("gamma", 0.0);
  fb.crown_depth = j.value("crown_depth", 0.0);
  fb.inward_margin = j.value("inward_margin", 0.0);
  fb.n_boundary_patches = j.value("n_boundary_patches", 0);
  return fb;
}

}  // namespace patchkit
