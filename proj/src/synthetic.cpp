#include "vlmap/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numbers>
#include <random>
#include <set>
#include <sstream>

#include "vlmap/errors.hpp"

namespace vlmap {

namespace {

Eigen::Vector3d parse_vec3(const std::string& s, int line) {
  Eigen::Vector3d v;
  char c1 = 0, c2 = 0;
  std::istringstream ss(s);
  if (!(ss >> v.x() >> c1 >> v.y() >> c2 >> v.z()) || c1 != ',' || c2 != ',')
    throw FormatError("scene spec line " + std::to_string(line) + ": expected x,y,z but got '" + s + "'", 0);
  return v;
}

double parse_double(const std::string& s, int line) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw FormatError("scene spec line " + std::to_string(line) + ": bad number '" + s + "'", 0);
  }
}

Eigen::Matrix3d yaw_matrix(double deg) {
  return Eigen::AngleAxisd(deg * std::numbers::pi / 180.0, Eigen::Vector3d::UnitZ()).toRotationMatrix();
}

struct Hit {
  double t = std::numeric_limits<double>::infinity();
  Eigen::Vector3d normal = Eigen::Vector3d::Zero();
  int class_id = 0;
  Eigen::Vector3d albedo = Eigen::Vector3d::Zero();
};

bool intersect_box(const SceneObject& obj, const Eigen::Vector3d& o, const Eigen::Vector3d& d,
                   double& t_out, Eigen::Vector3d& n_out) {
  const Eigen::Matrix3d r = yaw_matrix(obj.yaw_deg);
  const Eigen::Vector3d lo = r.transpose() * (o - obj.center);
  const Eigen::Vector3d ld = r.transpose() * d;
  const Eigen::Vector3d half = 0.5 * obj.size;
  double t_near = -std::numeric_limits<double>::infinity();
  double t_far = std::numeric_limits<double>::infinity();
  int axis = -1;
  for (int i = 0; i < 3; ++i) {
    if (std::abs(ld[i]) < 1e-15) {
      if (std::abs(lo[i]) > half[i]) return false;
      continue;
    }
    double t1 = (-half[i] - lo[i]) / ld[i];
    double t2 = (half[i] - lo[i]) / ld[i];
    if (t1 > t2) std::swap(t1, t2);
    if (t1 > t_near) {
      t_near = t1;
      axis = i;
    }
    t_far = std::min(t_far, t2);
  }
  if (axis < 0 || t_near > t_far || t_near <= 1e-9) return false;
  Eigen::Vector3d n = Eigen::Vector3d::Zero();
  n[axis] = ld[axis] > 0 ? -1.0 : 1.0;
  t_out = t_near;
  n_out = r * n;
  return true;
}

bool intersect_sphere(const SceneObject& obj, const Eigen::Vector3d& o, const Eigen::Vector3d& d,
                      double& t_out, Eigen::Vector3d& n_out) {
  const double radius = obj.size.x();
  const Eigen::Vector3d oc = o - obj.center;
  const double a = d.dot(d);
  const double b = oc.dot(d);
  const double c = oc.dot(oc) - radius * radius;
  const double disc = b * b - a * c;
  if (disc < 0) return false;
  const double t = (-b - std::sqrt(disc)) / a;
  if (t <= 1e-9) return false;
  t_out = t;
  n_out = (o + t * d - obj.center) / radius;
  return true;
}

double texture(const Eigen::Vector3d& p) {
  constexpr double k1 = 2 * std::numbers::pi / 0.25;
  constexpr double k2 = 2 * std::numbers::pi / 0.06;
  const double coarse = (std::sin(k1 * p.x()) + std::sin(k1 * p.y()) + std::sin(k1 * p.z())) / 3.0;
  const double fine =
      (std::sin(k2 * p.x() + 1.0) + std::sin(k2 * p.y() + 2.0) + std::sin(k2 * p.z() + 3.0)) / 3.0;
  return 0.65 + 0.2 * coarse + 0.15 * fine;
}

double box_sdf(const SceneObject& obj, const Eigen::Vector3d& p) {
  const Eigen::Vector3d local = yaw_matrix(obj.yaw_deg).transpose() * (p - obj.center);
  const Eigen::Vector3d q = local.cwiseAbs() - 0.5 * obj.size;
  return q.cwiseMax(0.0).norm() + std::min(q.maxCoeff(), 0.0);
}

std::vector<float> random_unit(std::mt19937_64& rng, std::uint32_t dim) {
  std::normal_distribution<double> n01(0.0, 1.0);
  std::vector<double> v(dim);
  double sq = 0;
  do {
    sq = 0;
    for (auto& x : v) {
      x = n01(rng);
      sq += x * x;
    }
  } while (sq < 1e-20);
  const double inv = 1.0 / std::sqrt(sq);
  std::vector<float> out(dim);
  for (std::uint32_t k = 0; k < dim; ++k) out[k] = static_cast<float>(v[k] * inv);
  return out;
}

double cosine(const std::vector<float>& a, const std::vector<float>& b) {
  double dot = 0;
  for (std::size_t k = 0; k < a.size(); ++k) dot += double(a[k]) * b[k];
  return dot;
}

}  // namespace

SceneSpec parse_scene_spec(const std::string& text) {
  SceneSpec spec;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    std::istringstream ss(line);
    std::string key;
    if (!(ss >> key)) continue;
    std::vector<std::string> args;
    for (std::string a; ss >> a;) args.push_back(a);
    auto one = [&]() -> const std::string& {
      if (args.size() != 1)
        throw FormatError("scene spec line " + std::to_string(lineno) + ": '" + key + "' takes one value", 0);
      return args[0];
    };
    if (key == "width") spec.intr.width = static_cast<int>(parse_double(one(), lineno));
    else if (key == "height") spec.intr.height = static_cast<int>(parse_double(one(), lineno));
    else if (key == "fx") spec.intr.fx = parse_double(one(), lineno);
    else if (key == "fy") spec.intr.fy = parse_double(one(), lineno);
    else if (key == "cx") spec.intr.cx = parse_double(one(), lineno);
    else if (key == "cy") spec.intr.cy = parse_double(one(), lineno);
    else if (key == "dim") spec.dim = static_cast<std::uint32_t>(parse_double(one(), lineno));
    else if (key == "frames") spec.frames = static_cast<int>(parse_double(one(), lineno));
    else if (key == "fps") spec.fps = parse_double(one(), lineno);
    else if (key == "floor_class") spec.floor_class = static_cast<int>(parse_double(one(), lineno));
    else if (key == "floor_half_size") spec.floor_half_size = parse_double(one(), lineno);
    else if (key == "floor_albedo") spec.floor_albedo = parse_vec3(one(), lineno);
    else if (key == "light") spec.light = parse_vec3(one(), lineno);
    else if (key == "object" || key == "arc") {
      SceneObject obj;
      std::size_t first = 0;
      if (key == "object") {
        if (args.empty())
          throw FormatError("scene spec line " + std::to_string(lineno) + ": object needs a shape", 0);
        if (args[0] == "box") obj.shape = Shape::box;
        else if (args[0] == "sphere") obj.shape = Shape::sphere;
        else throw FormatError("scene spec line " + std::to_string(lineno) + ": unknown shape '" + args[0] + "'", 0);
        first = 1;
      }
      for (std::size_t i = first; i < args.size(); ++i) {
        const auto eq = args[i].find('=');
        if (eq == std::string::npos)
          throw FormatError("scene spec line " + std::to_string(lineno) + ": expected key=value, got '" + args[i] + "'", 0);
        const std::string k = args[i].substr(0, eq), v = args[i].substr(eq + 1);
        if (key == "arc") {
          if (k == "target") spec.arc.target = parse_vec3(v, lineno);
          else if (k == "radius") spec.arc.radius = parse_double(v, lineno);
          else if (k == "height") spec.arc.height = parse_double(v, lineno);
          else if (k == "start") spec.arc.start_deg = parse_double(v, lineno);
          else if (k == "end") spec.arc.end_deg = parse_double(v, lineno);
          else throw FormatError("scene spec line " + std::to_string(lineno) + ": unknown arc field '" + k + "'", 0);
        } else if (k == "class") obj.class_id = static_cast<int>(parse_double(v, lineno));
        else if (k == "center") obj.center = parse_vec3(v, lineno);
        else if (k == "size") obj.size = parse_vec3(v, lineno);
        else if (k == "radius") obj.size = Eigen::Vector3d::Constant(parse_double(v, lineno));
        else if (k == "yaw") obj.yaw_deg = parse_double(v, lineno);
        else if (k == "albedo") obj.albedo = parse_vec3(v, lineno);
        else throw FormatError("scene spec line " + std::to_string(lineno) + ": unknown object field '" + k + "'", 0);
      }
      if (key == "object") spec.objects.push_back(obj);
    } else {
      throw FormatError("scene spec line " + std::to_string(lineno) + ": unknown key '" + key + "'", 0);
    }
  }
  return spec;
}

SceneSpec load_scene_spec(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open scene spec " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_scene_spec(ss.str());
}

SceneSpec default_scene_spec() {
  return parse_scene_spec(R"(
width 320
height 240
fx 200
fy 200
cx 159.5
cy 119.5
dim 16
frames 40
fps 30
floor_class 4
floor_half_size 1.5
object box class=1 center=0.25,0.2,0.15 size=0.3,0.25,0.3 yaw=20 albedo=0.85,0.35,0.3
object box class=2 center=0.2,-0.35,0.1 size=0.35,0.2,0.2 yaw=-10 albedo=0.3,0.4,0.85
object sphere class=3 center=-0.25,-0.05,0.16 radius=0.16 albedo=0.35,0.8,0.35
arc target=0,0,0.1 radius=1.3 height=0.9 start=-35 end=35
)");
}

SyntheticScene gen_scene(const SceneSpec& spec, std::uint64_t seed) {
  if (spec.objects.empty()) throw InputError("gen_scene: scene needs at least one object");
  if (spec.dim == 0) throw InputError("gen_scene: dim must be positive");
  spec.intr.validate();
  SyntheticScene scene;
  scene.spec = spec;

  std::set<int> classes;
  for (const auto& o : spec.objects) {
    if (o.class_id <= 0) throw InputError("gen_scene: object class ids must be positive");
    classes.insert(o.class_id);
  }
  if (spec.floor_class > 0) classes.insert(spec.floor_class);

  std::mt19937_64 rng(seed);
  int draws = 0;
  std::vector<std::vector<float>> accepted;
  for (const int c : classes) {
    while (true) {
      if (++draws > 10000)
        throw CapacityError("cannot place " + std::to_string(classes.size()) +
                            " class vectors with |cos| <= 0.1 in dimension " + std::to_string(spec.dim));
      auto v = random_unit(rng, spec.dim);
      const bool ok = std::all_of(accepted.begin(), accepted.end(),
                                  [&](const auto& a) { return std::abs(cosine(a, v)) <= 0.1; });
      if (!ok) continue;
      accepted.push_back(v);
      scene.class_embeddings[c] = std::move(v);
      break;
    }
  }

  for (int i = 0; i < spec.frames; ++i) {
    const double f = spec.frames > 1 ? double(i) / (spec.frames - 1) : 0.0;
    const double a = (spec.arc.start_deg + f * (spec.arc.end_deg - spec.arc.start_deg)) * std::numbers::pi / 180.0;
    const Eigen::Vector3d eye(spec.arc.target.x() + spec.arc.radius * std::cos(a),
                              spec.arc.target.y() + spec.arc.radius * std::sin(a), spec.arc.height);
    for (const auto& o : spec.objects) {
      const double sdf = o.shape == Shape::box ? box_sdf(o, eye) : (eye - o.center).norm() - o.size.x();
      if (sdf <= 0) throw InputError("gen_scene: camera path passes through an object");
    }
    scene.trajectory.push_back(i / spec.fps, look_at(eye, spec.arc.target));
  }
  return scene;
}

Pose look_at(const Eigen::Vector3d& eye, const Eigen::Vector3d& target) {
  const Eigen::Vector3d forward = (target - eye).normalized();
  Eigen::Vector3d right = forward.cross(Eigen::Vector3d::UnitZ());
  if (right.norm() < 1e-9) right = Eigen::Vector3d::UnitX();
  right.normalize();
  const Eigen::Vector3d down = forward.cross(right);
  Pose pose;
  pose.rotation.col(0) = right;
  pose.rotation.col(1) = down;
  pose.rotation.col(2) = forward;
  pose.translation = eye;
  return pose;
}

LabeledFrame render(const SyntheticScene& scene, const Pose& camera_to_world, const Intrinsics& intr) {
  const SceneSpec& spec = scene.spec;
  LabeledFrame out;
  out.frame.color = ColorImage(intr.width, intr.height, Rgb8::Zero());
  out.frame.depth = DepthImage(intr.width, intr.height, 0.0);
  out.labels = Image<std::int32_t>(intr.width, intr.height, 0);
  const Eigen::Vector3d light = spec.light.normalized();
  const Eigen::Vector3d origin = camera_to_world.translation;
  for (int v = 0; v < intr.height; ++v) {
    for (int u = 0; u < intr.width; ++u) {
      // Camera-frame direction with unit z, so the ray parameter is the depth.
      const Eigen::Vector3d dir_c((u - intr.cx) / intr.fx, (v - intr.cy) / intr.fy, 1.0);
      const Eigen::Vector3d dir = camera_to_world.rotation * dir_c;
      Hit best;
      for (const auto& obj : spec.objects) {
        double t;
        Eigen::Vector3d n;
        const bool hit = obj.shape == Shape::box ? intersect_box(obj, origin, dir, t, n)
                                                 : intersect_sphere(obj, origin, dir, t, n);
        if (hit && t < best.t) best = {t, n, obj.class_id, obj.albedo};
      }
      if (dir.z() < 0 && origin.z() > 0) {
        const double t = -origin.z() / dir.z();
        const Eigen::Vector3d p = origin + t * dir;
        if (t < best.t && std::abs(p.x()) <= spec.floor_half_size && std::abs(p.y()) <= spec.floor_half_size)
          best = {t, Eigen::Vector3d::UnitZ(), spec.floor_class, spec.floor_albedo};
      }
      if (!std::isfinite(best.t)) continue;
      const Eigen::Vector3d p = origin + best.t * dir;
      const double shade = 0.35 + 0.65 * std::max(0.0, best.normal.dot(light));
      const double tex = texture(p);
      Rgb8 rgb;
      for (int k = 0; k < 3; ++k)
        rgb[k] = static_cast<std::uint8_t>(std::clamp(std::lround(255.0 * best.albedo[k] * tex * shade), 0L, 255L));
      out.frame.color(u, v) = rgb;
      out.frame.depth(u, v) = best.t;
      out.labels(u, v) = std::max(best.class_id, 0);
    }
  }
  return out;
}

EmbeddingFrame synthetic_encode(const LabeledFrame& labeled, const SyntheticScene& scene, double sigma,
                                std::uint64_t seed) {
  const auto& labels = labeled.labels;
  EmbeddingFrame ef;
  ef.frame_index = static_cast<std::uint32_t>(labeled.frame.index);
  ef.width = static_cast<std::uint32_t>(labels.width());
  ef.height = static_cast<std::uint32_t>(labels.height());
  ef.dim = scene.spec.dim;
  std::mt19937_64 rng(seed ^ (0x9E3779B97F4A7C15ULL * (static_cast<std::uint64_t>(labeled.frame.index) + 1)));
  // sigma is the expected norm of the whole perturbation, split evenly over the
  // dimensions.
  std::normal_distribution<double> noise(0.0, sigma > 0 ? sigma / std::sqrt(double(scene.spec.dim)) : 1.0);

  Image<char> seen(labels.width(), labels.height(), 0);
  std::vector<std::pair<int, int>> component, stack;
  for (int v = 0; v < labels.height(); ++v) {
    for (int u = 0; u < labels.width(); ++u) {
      const int cls = labels(u, v);
      if (cls == 0 || seen(u, v)) continue;
      const auto table = scene.class_embeddings.find(cls);
      if (table == scene.class_embeddings.end())
        throw InputError("synthetic_encode: class " + std::to_string(cls) + " missing from embedding table");
      component.clear();
      stack.assign(1, {u, v});
      seen(u, v) = 1;
      int u0 = u, u1 = u, v0 = v, v1 = v;
      while (!stack.empty()) {
        const auto [x, y] = stack.back();
        stack.pop_back();
        component.emplace_back(x, y);
        u0 = std::min(u0, x), u1 = std::max(u1, x), v0 = std::min(v0, y), v1 = std::max(v1, y);
        constexpr int du[4] = {1, -1, 0, 0}, dv[4] = {0, 0, 1, -1};
        for (int k = 0; k < 4; ++k) {
          const int nx = x + du[k], ny = y + dv[k];
          if (labels.contains(nx, ny) && !seen(nx, ny) && labels(nx, ny) == cls) {
            seen(nx, ny) = 1;
            stack.emplace_back(nx, ny);
          }
        }
      }
      SegmentRecord seg;
      seg.u = static_cast<std::uint32_t>(u0);
      seg.v = static_cast<std::uint32_t>(v0);
      seg.width = static_cast<std::uint32_t>(u1 - u0 + 1);
      seg.height = static_cast<std::uint32_t>(v1 - v0 + 1);
      seg.mask.assign(std::size_t{seg.width} * seg.height, 0);
      for (const auto& [x, y] : component) seg.mask[std::size_t(y - v0) * seg.width + (x - u0)] = 1;
      seg.embedding = table->second;
      if (sigma > 0) {
        std::vector<double> e(seg.embedding.begin(), seg.embedding.end());
        double sq = 0;
        for (auto& x : e) {
          x += noise(rng);
          sq += x * x;
        }
        const double inv = 1.0 / std::sqrt(sq);
        for (std::size_t k = 0; k < e.size(); ++k) seg.embedding[k] = static_cast<float>(e[k] * inv);
      }
      ef.segments.push_back(std::move(seg));
    }
  }
  return ef;
}

QueryEmbedding object_query(const SyntheticScene& scene) {
  std::vector<double> sum(scene.spec.dim, 0.0);
  for (const auto& [cls, e] : scene.class_embeddings)
    for (std::size_t k = 0; k < e.size(); ++k) sum[k] += e[k];
  double sq = 0;
  for (double x : sum) sq += x * x;
  QueryEmbedding q{"object", std::vector<float>(scene.spec.dim)};
  for (std::size_t k = 0; k < sum.size(); ++k) q.embedding[k] = static_cast<float>(sum[k] / std::sqrt(sq));
  return q;
}

QueryEmbedding class_query(const SyntheticScene& scene, int class_id) {
  const auto it = scene.class_embeddings.find(class_id);
  if (it == scene.class_embeddings.end()) throw InputError("unknown class " + std::to_string(class_id));
  return {"class" + std::to_string(class_id), it->second};
}

int classify_point(const SyntheticScene& scene, const Eigen::Vector3d& p, double tol) {
  int best_class = 0;
  double best = tol;
  for (const auto& o : scene.spec.objects) {
    const double d = std::abs(o.shape == Shape::box ? box_sdf(o, p) : (p - o.center).norm() - o.size.x());
    if (d <= best) {
      best = d;
      best_class = o.class_id;
    }
  }
  const auto& s = scene.spec;
  if (s.floor_class > 0 && std::abs(p.z()) <= best && std::abs(p.x()) <= s.floor_half_size + tol &&
      std::abs(p.y()) <= s.floor_half_size + tol)
    best_class = s.floor_class;
  return best_class;
}

}  // namespace vlmap
