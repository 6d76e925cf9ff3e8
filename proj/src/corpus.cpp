#include "hoi/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <optional>
#include <sstream>

#include "hoi/affordance.hpp"

namespace hoi::corpus {
namespace {

using geom::PointCloud;
using motion::GlobalJoints;

// Arm and leg segment lengths implied by the rest offsets.
constexpr double kArmUpper = 0.28;
constexpr double kArmFore = 0.25;
constexpr double kThigh = 0.40;
constexpr double kShin = 0.40;

// Planning distance from shoulder to a hand target; below the hard arm
// length so sway and jitter cannot push a pose past the IK limit.
constexpr double kReachBudget = 0.46;
constexpr double kLeanMax = 1.0;       // torso pitch at full crouch, radians
constexpr double kCrouchMin = 0.55;    // lowest pelvis height the planner may use
constexpr double kStandHeight = 0.95;
constexpr double kKneeSlack = 0.015;   // standing knees stay this far from lockout

// Non-contact candidate joints keep this distance from the object so the
// contact annotation stays unambiguous; contact joints must approach closer
// than kContactMargin so it triggers.
constexpr double kClearance = affordance::kContactGamma + 0.02;
constexpr double kContactMargin = affordance::kContactGamma - 0.02;

double smoothstep(double u) {
  u = std::clamp(u, 0.0, 1.0);
  return u * u * (3.0 - 2.0 * u);
}

Eigen::Matrix3d rot_x(double a) {
  const double c = std::cos(a), s = std::sin(a);
  Eigen::Matrix3d m;
  m << 1, 0, 0, 0, c, -s, 0, s, c;
  return m;
}

// Offset of a joint from the pelvis in the rest skeleton.
Vec3 chain_offset(int joint) {
  Vec3 c = Vec3::Zero();
  for (int j = joint; j != motion::kPelvis; j = motion::kParents[j]) c += motion::rest_offsets()[j];
  return c;
}

// --- object geometry ------------------------------------------------------

struct BoxPart {
  Vec3 center;
  Vec3 half;
};

struct ObjectModel {
  PointCloud cloud;  // rest frame: standing on y = 0, centered in xz
  Vec3 top, side_l, side_r, front_l, front_r, seat;
};

void sample_box_surfaces(const std::vector<BoxPart>& parts, Eigen::Index n, Rng& rng, Mat& pts,
                         Mat& nrm) {
  struct Face {
    const BoxPart* part;
    int axis;
    double sign;
    double area;
  };
  std::vector<Face> faces;
  double total = 0.0;
  for (const BoxPart& p : parts)
    for (int axis = 0; axis < 3; ++axis)
      for (double sign : {-1.0, 1.0}) {
        const double area = 4.0 * p.half[(axis + 1) % 3] * p.half[(axis + 2) % 3];
        faces.push_back({&p, axis, sign, area});
        total += area;
      }
  pts.resize(n, 3);
  nrm.resize(n, 3);
  for (Eigen::Index i = 0; i < n; ++i) {
    double pick = rng.uniform() * total;
    const Face* f = &faces.back();
    for (const Face& face : faces) {
      if (pick < face.area) {
        f = &face;
        break;
      }
      pick -= face.area;
    }
    Vec3 p = f->part->center;
    p[f->axis] += f->sign * f->part->half[f->axis];
    const int u = (f->axis + 1) % 3;
    const int v = (f->axis + 2) % 3;
    p[u] += (2.0 * rng.uniform() - 1.0) * f->part->half[u];
    p[v] += (2.0 * rng.uniform() - 1.0) * f->part->half[v];
    Vec3 normal = Vec3::Zero();
    normal[f->axis] = f->sign;
    pts.row(i) = p.transpose();
    nrm.row(i) = normal.transpose();
  }
}

void sample_sphere_surface(const Vec3& center, double r, Eigen::Index n, Rng& rng, Mat& pts,
                           Mat& nrm) {
  pts.resize(n, 3);
  nrm.resize(n, 3);
  for (Eigen::Index i = 0; i < n; ++i) {
    Vec3 dir(rng.normal(), rng.normal(), rng.normal());
    while (dir.norm() < 1e-6) dir = Vec3(rng.normal(), rng.normal(), rng.normal());
    dir.normalize();
    pts.row(i) = (center + r * dir).transpose();
    nrm.row(i) = dir.transpose();
  }
}

double jitter(Rng& rng, double spread) { return 1.0 + spread * (2.0 * rng.uniform() - 1.0); }

ObjectModel build_object(const std::string& object, Rng& rng) {
  ObjectModel m;
  Mat pts, nrm;
  if (object == "box") {
    const Vec3 he(0.14 * jitter(rng, 0.1), 0.13 * jitter(rng, 0.1), 0.14 * jitter(rng, 0.1));
    sample_box_surfaces({{Vec3(0, he.y(), 0), he}}, data::kCloudPoints, rng, pts, nrm);
    m.top = Vec3(0, 2 * he.y(), 0);
    m.side_l = Vec3(he.x(), he.y(), 0);
    m.side_r = Vec3(-he.x(), he.y(), 0);
    m.front_l = Vec3(0.5 * he.x(), he.y(), -he.z());
    m.front_r = Vec3(-0.5 * he.x(), he.y(), -he.z());
    m.seat = m.top;
  } else if (object == "ball") {
    const double r = 0.11 * jitter(rng, 0.1);
    const Vec3 c(0, r, 0);
    sample_sphere_surface(c, r, data::kCloudPoints, rng, pts, nrm);
    m.top = c + Vec3(0, r, 0);
    m.side_l = c + Vec3(r, 0, 0);
    m.side_r = c + Vec3(-r, 0, 0);
    m.front_l = c + r * Vec3(0.5, 0, -0.866);
    m.front_r = c + r * Vec3(-0.5, 0, -0.866);
    m.seat = m.top;
  } else if (object == "chair") {
    const double s = jitter(rng, 0.08);
    std::vector<BoxPart> parts = {{Vec3(0, 0.43 * s, 0), s * Vec3(0.18, 0.02, 0.18)}};
    for (double sx : {-1.0, 1.0})
      for (double sz : {-1.0, 1.0})
        parts.push_back({Vec3(sx * 0.15 * s, 0.205 * s, sz * 0.15 * s),
                         Vec3(0.02, 0.205 * s, 0.02)});
    sample_box_surfaces(parts, data::kCloudPoints, rng, pts, nrm);
    m.top = m.seat = Vec3(0, 0.45 * s, 0);
    m.side_l = Vec3(0.18 * s, 0.44 * s, 0);
    m.side_r = Vec3(-0.18 * s, 0.44 * s, 0);
    m.front_l = Vec3(0.10 * s, 0.44 * s, -0.18 * s);
    m.front_r = Vec3(-0.10 * s, 0.44 * s, -0.18 * s);
  } else if (object == "table") {
    const double s = jitter(rng, 0.08);
    std::vector<BoxPart> parts = {{Vec3(0, 0.68 * s, 0), s * Vec3(0.27, 0.02, 0.20)}};
    for (double sx : {-1.0, 1.0})
      for (double sz : {-1.0, 1.0})
        parts.push_back({Vec3(sx * 0.23 * s, 0.33 * s, sz * 0.16 * s),
                         Vec3(0.02, 0.33 * s, 0.02)});
    sample_box_surfaces(parts, data::kCloudPoints, rng, pts, nrm);
    // Grasp landmarks sit on the near edge: the top is wide and low, and
    // reaching its center would fold the torso onto the surface.
    m.top = Vec3(0, 0.70 * s, -0.14 * s);
    m.seat = Vec3(0, 0.70 * s, -0.10 * s);
    m.side_l = Vec3(0.27 * s, 0.68 * s, -0.14 * s);
    m.side_r = Vec3(-0.27 * s, 0.68 * s, -0.14 * s);
    m.front_l = Vec3(0.10 * s, 0.69 * s, -0.20 * s);
    m.front_r = Vec3(-0.10 * s, 0.69 * s, -0.20 * s);
  } else {
    throw std::invalid_argument("generate_corpus: unknown object '" + object + "'");
  }
  snap_f32(pts);
  snap_f32(nrm);
  m.cloud.points = std::move(pts);
  m.cloud.normals = std::move(nrm);
  // Landmarks become actual cloud points so stored contact points lie
  // exactly on the sampled surface.
  for (Vec3* lm : {&m.top, &m.side_l, &m.side_r, &m.front_l, &m.front_r, &m.seat})
    *lm = geom::snap_to_cloud(*lm, m.cloud).point;
  return m;
}

// --- action plans ---------------------------------------------------------

struct Plan {
  std::vector<int> label_positions;  // indices into the candidate-joint list
  Mat rest_points = Mat::Zero(2, 3);
  Vec3 t0 = Vec3::Zero();   // initial object translation (person at origin)
  Vec3 delta = Vec3::Zero();
  double yaw_amp = 0.0;
  double distance = 0.45;   // person-to-object distance
  bool sit = false;
  double sit_forward = 0.10;  // pelvis stops this far short of the object center
  double state = 1.0;
  bool use_l = false, use_r = false;
  Vec3 hand_l = Vec3::Zero(), hand_r = Vec3::Zero();  // rest-frame grasp points
  Vec3 seat_point = Vec3::Zero();
};

// Grasp-friendly shelf height for the freestanding objects; furniture
// interacts at its own height.
double pedestal_height(const std::string& action, const std::string& object) {
  if (action == "sit") return 0.0;
  if (object == "box" || object == "ball") return 0.87;
  return 0.0;
}

Plan make_plan(const std::string& action, const std::string& object, const ObjectModel& m,
               Rng& rng) {
  const bool furniture = (object == "chair" || object == "table");
  Plan p;
  p.t0 = Vec3(0, pedestal_height(action, object), 0);
  if (action == "carry") {
    p.label_positions = {6, 7};  // both hands
    p.use_l = p.use_r = true;
    p.hand_l = m.side_l;
    p.hand_r = m.side_r;
    const double sx = rng.uniform() < 0.5 ? 1.0 : -1.0;
    p.delta = Vec3(0.15 * sx, 0.12, 0.08) * jitter(rng, 0.1);
    p.yaw_amp = 0.15 * (rng.uniform() < 0.5 ? 1.0 : -1.0);
    p.distance = furniture ? 0.50 : 0.36;
  } else if (action == "lift-left" || action == "lift-right") {
    const bool left = action == "lift-left";
    p.label_positions = {left ? 6 : 7};
    (left ? p.use_l : p.use_r) = true;
    (left ? p.hand_l : p.hand_r) = m.top;
    p.delta = Vec3(0, 0.20, 0) * jitter(rng, 0.1);
    p.distance = object == "table" ? 0.48 : (object == "chair" ? 0.45 : 0.38);
  } else if (action == "sit") {
    p.label_positions = {0};  // pelvis
    p.sit = true;
    p.state = 0.0;
    p.seat_point = m.seat;
    p.distance = 0.50;
    p.sit_forward = object == "ball" ? 0.05 : 0.10;
  } else if (action == "push" || action == "pull") {
    p.label_positions = {6, 7};
    p.use_l = p.use_r = true;
    p.hand_l = m.front_l;
    p.hand_r = m.front_r;
    const double amp = (action == "push" ? 0.18 : -0.18) * jitter(rng, 0.1);
    p.delta = Vec3(0, 0, amp);
    if (action == "pull") p.distance = object == "chair" ? 0.65 : (furniture ? 0.60 : 0.50);
    else p.distance = furniture ? 0.50 : 0.45;
  } else {
    throw std::invalid_argument("generate_corpus: unknown action '" + action + "'");
  }
  p.t0.z() = p.distance;

  const std::vector<int>& lp = p.label_positions;
  auto point_of = [&](int pos) -> Vec3 {
    const int joint = motion::kPrimaryJoints[static_cast<std::size_t>(pos)];
    if (joint == motion::kLeftWrist) return p.hand_l;
    if (joint == motion::kRightWrist) return p.hand_r;
    return p.seat_point;
  };
  p.rest_points.row(0) = point_of(lp[0]).transpose();
  p.rest_points.row(1) = point_of(lp.size() > 1 ? lp[1] : lp[0]).transpose();
  return p;
}

const char* prompt_template(const std::string& action, int pick) {
  static const std::array<std::array<const char*, 3>, 6> table = {{
      {"a person carries the OBJ to the side", "a person picks up the OBJ and carries it",
       "someone carries the OBJ carefully"},
      {"a person lifts the OBJ with the left hand", "a person lifts up the OBJ using the left hand",
       "someone lifts the OBJ with their left hand"},
      {"a person lifts the OBJ with the right hand",
       "a person lifts up the OBJ using the right hand",
       "someone lifts the OBJ with their right hand"},
      {"a person sits on the OBJ", "a person sits down on the OBJ",
       "someone takes a seat and sits on the OBJ"},
      {"a person pushes the OBJ forward", "a person pushes the OBJ away",
       "someone pushes the OBJ across the surface"},
      {"a person pulls the OBJ closer", "a person pulls the OBJ toward them",
       "someone pulls the OBJ nearer"},
  }};
  int row = 0;
  if (action == "carry") row = 0;
  else if (action == "lift-left") row = 1;
  else if (action == "lift-right") row = 2;
  else if (action == "sit") row = 3;
  else if (action == "push") row = 4;
  else row = 5;
  return table[static_cast<std::size_t>(row)][static_cast<std::size_t>(pick)];
}

std::string make_prompt(const std::string& action, const std::string& object, Rng& rng) {
  std::string text = prompt_template(action, rng.uniform_int(0, 2));
  const std::string::size_type at = text.find("OBJ");
  return text.substr(0, at) + object + text.substr(at + 3);
}

// --- kinematic synthesis --------------------------------------------------

struct Timeline {
  Eigen::Index approach_end;  // first attached frame
  Eigen::Index move_end;      // object motion complete
};

Timeline make_timeline(Eigen::Index L) {
  Timeline t;
  t.approach_end = std::max<Eigen::Index>(2, static_cast<Eigen::Index>(std::lround(0.25 * L)));
  t.move_end =
      std::min<Eigen::Index>(L - 1, std::max<Eigen::Index>(t.approach_end + 2,
                                                           static_cast<Eigen::Index>(
                                                               std::lround(0.7 * L))));
  return t;
}

std::optional<Vec3> two_bone_ik(const Vec3& root, const Vec3& tip, double a, double b,
                                const Vec3& pole) {
  const Vec3 diff = tip - root;
  const double d = diff.norm();
  if (d > a + b - 1e-4 || d < std::abs(a - b) + 1e-4) return std::nullopt;
  const Vec3 n = diff / d;
  const double cos_a = (a * a + d * d - b * b) / (2.0 * a * d);
  const double proj = a * cos_a;
  const double radius = a * std::sqrt(std::max(0.0, 1.0 - cos_a * cos_a));
  Vec3 u = pole - n * pole.dot(n);
  if (u.norm() < 1e-9) {
    u = Vec3(0, 1, 0) - n * n.y();
    if (u.norm() < 1e-9) u = Vec3(1, 0, 0) - n * n.x();
  }
  u.normalize();
  return root + n * proj + u * radius;
}

struct SynthParams {
  double stand_height;
  double head_sway_amp;
  int head_sway_freq;
  double pelvis_sway_amp;
};

// Object pose (person-at-origin frame) at frame l.
geom::Pose6DoF plan_pose(const Plan& plan, const Timeline& tl, Eigen::Index l) {
  const double e = smoothstep(static_cast<double>(l - tl.approach_end) /
                              static_cast<double>(tl.move_end - tl.approach_end));
  geom::Pose6DoF pose;
  pose.rotation = Vec3(0, plan.yaw_amp * e, 0);
  pose.translation = plan.t0 + plan.delta * e;
  return pose;
}

// Smallest crouch/lean factor whose shoulder positions can reach every hand
// target across the attached phase.
std::optional<double> solve_crouch(const Plan& plan, const Timeline& tl, Eigen::Index L,
                                   const SynthParams& sp, const std::vector<double>& head) {
  if (!plan.use_l && !plan.use_r) return 0.0;
  const Vec3 cum_l = chain_offset(motion::kLeftShoulder);
  const Vec3 cum_r = chain_offset(motion::kRightShoulder);
  for (int step = 0; step <= 50; ++step) {
    const double lam = step / 50.0;
    const double h = sp.stand_height - lam * (sp.stand_height - kCrouchMin);
    const Eigen::Matrix3d pitch = rot_x(lam * kLeanMax);
    bool ok = true;
    for (Eigen::Index l = tl.approach_end; l < L && ok; ++l) {
      const geom::Pose6DoF pose = plan_pose(plan, tl, l);
      const Eigen::Matrix3d rot = geom::rodrigues(pose.rotation);
      const Eigen::Matrix3d m = geom::rot_y(head[static_cast<std::size_t>(l)]) * pitch;
      const Vec3 pelvis(0, h, 0);
      if (plan.use_l) {
        const Vec3 target = rot * plan.hand_l + pose.translation;
        if ((pelvis + m * cum_l - target).norm() > kReachBudget) ok = false;
      }
      if (plan.use_r) {
        const Vec3 target = rot * plan.hand_r + pose.translation;
        if ((pelvis + m * cum_r - target).norm() > kReachBudget) ok = false;
      }
    }
    if (ok) return lam;
  }
  return std::nullopt;
}

struct SynthResult {
  GlobalJoints joints;
  Mat object_frames;  // L x 6
};

// Build the full clip in the person-at-origin frame. Returns nullopt with a
// reason when the jittered geometry is infeasible.
std::optional<SynthResult> synthesize(const Plan& plan, const ObjectModel& model, Eigen::Index L,
                                      Rng& rng, std::string* reason) {
  const Timeline tl = make_timeline(L);
  SynthParams sp;
  sp.stand_height = kStandHeight * jitter(rng, 0.02);
  sp.head_sway_amp = 0.03 + 0.02 * rng.uniform();
  sp.head_sway_freq = rng.uniform() < 0.5 ? 1 : 2;
  sp.pelvis_sway_amp = 0.012 * jitter(rng, 0.3);

  std::vector<double> head(static_cast<std::size_t>(L));
  for (Eigen::Index l = 0; l < L; ++l)
    head[static_cast<std::size_t>(l)] =
        sp.head_sway_amp *
        std::sin(2.0 * M_PI * sp.head_sway_freq * static_cast<double>(l) /
                 static_cast<double>(L - 1));

  const auto lam_opt = solve_crouch(plan, tl, L, sp, head);
  if (!lam_opt) {
    *reason = "hand targets unreachable at any crouch depth";
    return std::nullopt;
  }
  const double lam_hold = *lam_opt;

  const double ankle_y = sp.stand_height - 0.86 + kKneeSlack;
  const Vec3 ankle_fixed_l(0.10, ankle_y, 0.0);
  const Vec3 ankle_fixed_r(-0.10, ankle_y, 0.0);
  const Vec3 toe_off = motion::rest_offsets()[motion::kLeftFoot];  // same both sides

  const Vec3 cum_sh_l = chain_offset(motion::kLeftShoulder);
  const Vec3 cum_sh_r = chain_offset(motion::kRightShoulder);
  const Vec3 cum_neck = chain_offset(motion::kNeck);
  const Vec3 cum_head = chain_offset(motion::kHead);
  const Vec3 cum_sp1 = chain_offset(motion::kSpine1);
  const Vec3 cum_sp2 = chain_offset(motion::kSpine2);
  const Vec3 cum_sp3 = chain_offset(motion::kSpine3);
  const Vec3 cum_col_l = chain_offset(motion::kLeftCollar);
  const Vec3 cum_col_r = chain_offset(motion::kRightCollar);
  const Vec3 hip_off_l = motion::rest_offsets()[motion::kLeftHip];
  const Vec3 hip_off_r = motion::rest_offsets()[motion::kRightHip];

  const double seat_y = plan.seat_point.y() + plan.t0.y();
  SynthResult out;
  out.joints = GlobalJoints(L);
  out.object_frames = Mat::Zero(L, motion::obj::kDim);

  for (Eigen::Index l = 0; l < L; ++l) {
    const double tnorm = static_cast<double>(l) / static_cast<double>(L - 1);
    const double sway_x = sp.pelvis_sway_amp * std::sin(2.0 * M_PI * tnorm);
    const double sway_z = sp.pelvis_sway_amp * std::sin(4.0 * M_PI * tnorm);
    const double sit_e = plan.sit
                             ? smoothstep(static_cast<double>(l - tl.approach_end) /
                                          static_cast<double>(tl.move_end - tl.approach_end))
                             : 0.0;
    const double lam = plan.sit ? 0.0
                                : lam_hold * smoothstep(static_cast<double>(l) /
                                                        static_cast<double>(tl.approach_end));

    double height = sp.stand_height - lam * (sp.stand_height - kCrouchMin);
    double pelvis_z = 0.0;
    double pitch_angle = lam * kLeanMax;
    if (plan.sit) {
      height = sp.stand_height + sit_e * (seat_y + 0.05 - sp.stand_height);
      pelvis_z = sit_e * (plan.distance - plan.sit_forward);
      pitch_angle = 0.12 * std::sin(M_PI * sit_e);
    }
    const Vec3 pelvis(sway_x, height, pelvis_z + sway_z);
    const Eigen::Matrix3d rot_head = geom::rot_y(head[static_cast<std::size_t>(l)]);
    const Eigen::Matrix3d torso = rot_head * rot_x(pitch_angle);

    auto set = [&](int j, const Vec3& p) { out.joints.set_joint(l, j, p); };
    set(motion::kPelvis, pelvis);
    set(motion::kSpine1, pelvis + torso * cum_sp1);
    set(motion::kSpine2, pelvis + torso * cum_sp2);
    set(motion::kSpine3, pelvis + torso * cum_sp3);
    set(motion::kNeck, pelvis + torso * cum_neck);
    set(motion::kHead, pelvis + torso * cum_head);
    set(motion::kLeftCollar, pelvis + torso * cum_col_l);
    set(motion::kRightCollar, pelvis + torso * cum_col_r);
    const Vec3 sh_l = pelvis + torso * cum_sh_l;
    const Vec3 sh_r = pelvis + torso * cum_sh_r;
    set(motion::kLeftShoulder, sh_l);
    set(motion::kRightShoulder, sh_r);

    // Legs: hips ride the pelvis (heading only, no pitch), ankles planted.
    const Vec3 hip_l = pelvis + rot_head * hip_off_l;
    const Vec3 hip_r = pelvis + rot_head * hip_off_r;
    const Vec3 leg_pole = rot_head * Vec3(0, 0, 1);
    const auto knee_l = two_bone_ik(hip_l, ankle_fixed_l, kThigh, kShin, leg_pole);
    const auto knee_r = two_bone_ik(hip_r, ankle_fixed_r, kThigh, kShin, leg_pole);
    if (!knee_l || !knee_r) {
      *reason = "leg configuration out of range at frame " + std::to_string(l);
      return std::nullopt;
    }
    set(motion::kLeftHip, hip_l);
    set(motion::kRightHip, hip_r);
    set(motion::kLeftKnee, *knee_l);
    set(motion::kRightKnee, *knee_r);
    set(motion::kLeftAnkle, ankle_fixed_l);
    set(motion::kRightAnkle, ankle_fixed_r);
    set(motion::kLeftFoot, ankle_fixed_l + rot_head * toe_off);
    set(motion::kRightFoot, ankle_fixed_r + rot_head * toe_off);

    // Arms: used hands blend from a relaxed pose onto the grasp point, then
    // track it rigidly with the object.
    const geom::Pose6DoF pose = plan_pose(plan, tl, l);
    const Eigen::Matrix3d obj_rot = geom::rodrigues(pose.rotation);
    const double blend = smoothstep(static_cast<double>(l) / static_cast<double>(tl.approach_end));
    struct Arm {
      bool used;
      Vec3 grasp;
      const Vec3* shoulder;
      double side;
      int elbow_joint, wrist_joint;
    };
    const Arm arms[2] = {
        {plan.use_l, plan.hand_l, &sh_l, 1.0, motion::kLeftElbow, motion::kLeftWrist},
        {plan.use_r, plan.hand_r, &sh_r, -1.0, motion::kRightElbow, motion::kRightWrist}};
    for (const Arm& arm : arms) {
      const Vec3 rest_hand = *arm.shoulder + torso * Vec3(arm.side * 0.40, -0.06, 0.10);
      Vec3 target = rest_hand;
      if (arm.used) {
        const Vec3 grasp_world = obj_rot * arm.grasp + pose.translation;
        target = l < tl.approach_end ? Vec3(rest_hand + blend * (grasp_world - rest_hand))
                                     : grasp_world;
        // The attach-phase blend may momentarily outrun the crouch; pull the
        // target inside the arm's reach (never triggered once attached).
        const Vec3 offset = target - *arm.shoulder;
        const double max_arm = kArmUpper + kArmFore - 0.02;
        if (offset.norm() > max_arm)
          target = *arm.shoulder + offset * (max_arm / offset.norm());
      }
      const Vec3 pole = torso * Vec3(arm.side * 0.35, -0.9, -0.2);
      const auto elbow = two_bone_ik(*arm.shoulder, target, kArmUpper, kArmFore, pole);
      if (!elbow) {
        *reason = "arm target out of reach at frame " + std::to_string(l);
        return std::nullopt;
      }
      set(arm.elbow_joint, *elbow);
      set(arm.wrist_joint, target);
    }

    out.object_frames.block<1, 3>(l, motion::obj::kRot) = pose.rotation.transpose();
    out.object_frames.block<1, 3>(l, motion::obj::kTrans) = pose.translation.transpose();
  }
  return out;
}

// Contact-layout and state checks on the synthesized clip.
bool verify_sample(const SynthResult& synth, const Plan& plan, const ObjectModel& model,
                   std::string* reason) {
  const Eigen::Index L = synth.joints.num_frames();
  std::vector<bool> is_label(motion::kNumPrimaryJoints, false);
  for (int pos : plan.label_positions) is_label[static_cast<std::size_t>(pos)] = true;

  std::vector<double> closest(motion::kNumPrimaryJoints,
                              std::numeric_limits<double>::infinity());
  for (Eigen::Index l = 0; l < L; ++l) {
    geom::Pose6DoF pose;
    pose.rotation = synth.object_frames.block<1, 3>(l, motion::obj::kRot).transpose();
    pose.translation = synth.object_frames.block<1, 3>(l, motion::obj::kTrans).transpose();
    const Mat posed = geom::apply_pose(pose, model.cloud.points);
    for (int c = 0; c < motion::kNumPrimaryJoints; ++c) {
      const Vec3 p = synth.joints.joint(l, motion::kPrimaryJoints[static_cast<std::size_t>(c)]);
      double best = std::numeric_limits<double>::infinity();
      for (Eigen::Index i = 0; i < posed.rows(); ++i)
        best = std::min(best, (posed.row(i).transpose() - p).squaredNorm());
      closest[static_cast<std::size_t>(c)] =
          std::min(closest[static_cast<std::size_t>(c)], std::sqrt(best));
    }
  }
  for (int c = 0; c < motion::kNumPrimaryJoints; ++c) {
    if (is_label[static_cast<std::size_t>(c)] &&
        closest[static_cast<std::size_t>(c)] > kContactMargin) {
      *reason = "contact joint never reaches the surface (closest " +
                std::to_string(closest[static_cast<std::size_t>(c)]) + " m)";
      return false;
    }
    if (!is_label[static_cast<std::size_t>(c)] &&
        closest[static_cast<std::size_t>(c)] < kClearance) {
      *reason = "non-contact joint " + std::to_string(c) + " too close to the object (" +
                std::to_string(closest[static_cast<std::size_t>(c)]) + " m)";
      return false;
    }
  }

  // Object-state margin so the annotation threshold is never borderline.
  const RowVec mean_t = synth.object_frames.middleCols(motion::obj::kTrans, 3).colwise().mean();
  double max_dev = 0.0;
  for (Eigen::Index l = 0; l < L; ++l)
    max_dev = std::max(max_dev, (synth.object_frames.block<1, 3>(l, motion::obj::kTrans) - mean_t)
                                    .norm());
  if (plan.state > 0.5 && max_dev < affordance::kStateThreshold * 1.5) {
    *reason = "moving object translation margin too small (" + std::to_string(max_dev) + " m)";
    return false;
  }
  if (plan.state < 0.5 && max_dev > affordance::kStateThreshold * 0.5) {
    *reason = "static object drifted (" + std::to_string(max_dev) + " m)";
    return false;
  }

  // Planted feet: no transition may cross the contact-speed threshold.
  for (Eigen::Index l = 0; l + 1 < L; ++l)
    for (int f : motion::kFootJoints)
      if ((synth.joints.joint(l + 1, f) - synth.joints.joint(l, f)).norm() >
          motion::kContactSpeedThreshold * 0.8) {
        *reason = "foot drifts beyond the contact threshold at frame " + std::to_string(l);
        return false;
      }
  return true;
}

}  // namespace

std::vector<data::HoiSample> generate_corpus(const CorpusSpec& spec, CorpusReport* report) {
  require(!spec.actions.empty() && !spec.objects.empty(),
          "generate_corpus: action and object sets must be non-empty");
  require(spec.frames >= 8, "generate_corpus: need at least 8 frames");
  require(spec.samples_per_pair >= 1, "generate_corpus: samples_per_pair must be positive");
  for (const std::string& a : spec.actions)
    require(std::find(known_actions().begin(), known_actions().end(), a) != known_actions().end(),
            "generate_corpus: unknown action '" + a + "'");
  for (const std::string& o : spec.objects)
    require(std::find(known_objects().begin(), known_objects().end(), o) != known_objects().end(),
            "generate_corpus: unknown object '" + o + "'");

  CorpusReport local;
  CorpusReport& rep = report != nullptr ? *report : local;
  rep = CorpusReport{};

  std::vector<data::HoiSample> samples;
  const Rng master(spec.seed);
  std::uint64_t index = 0;
  for (const std::string& action : spec.actions) {
    for (const std::string& object : spec.objects) {
      for (int k = 0; k < spec.samples_per_pair; ++k, ++index) {
        Rng rng = master.split(index);
        const ObjectModel model = build_object(object, rng);
        const Plan plan = make_plan(action, object, model, rng);

        std::string reason;
        auto synth = synthesize(plan, model, spec.frames, rng, &reason);
        if (synth && !verify_sample(*synth, plan, model, &reason)) synth.reset();
        if (!synth) {
          ++rep.skipped;
          rep.skip_reasons.push_back(action + "/" + object + "[" + std::to_string(k) +
                                     "]: " + reason);
          continue;
        }

        data::HoiSample s;
        std::ostringstream id;
        id << action << "_" << object << "_" << std::setw(4) << std::setfill('0') << k;
        s.id = id.str();
        s.prompt = make_prompt(action, object, rng);
        s.human = motion::encode_human(synth->joints, spec.fps);
        snap_f32(s.human.frames);
        s.object.frames = synth->object_frames;
        snap_f32(s.object.frames);
        s.cloud = model.cloud;
        s.affordance.labels = Vec::Zero(motion::kNumPrimaryJoints);
        for (int pos : plan.label_positions) s.affordance.labels[pos] = 1.0;
        s.affordance.contact_points = plan.rest_points;
        snap_f32(s.affordance.contact_points);
        s.affordance.object_state = plan.state;

        // Annotation audit: re-derive the record from the stored encoding.
        const affordance::AffordanceRecord re = affordance::extract_gt_affordance(
            motion::recover_global_joints(s.human),
            motion::ObjectMotionSeq{s.object.frames}, s.cloud);
        ++rep.audited;
        if ((re.labels - s.affordance.labels).cwiseAbs().maxCoeff() > 0.5 ||
            std::abs(re.object_state - s.affordance.object_state) > 0.5)
          ++rep.label_mismatches;

        samples.push_back(std::move(s));
        ++rep.generated;
      }
    }
  }
  return samples;
}

}  // namespace hoi::corpus
