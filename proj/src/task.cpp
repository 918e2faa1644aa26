#include "pegnet/task.hpp"

#include "pegnet/errors.hpp"

namespace pegnet {

TaskSpec TaskSpec::make(TaskKind kind, int dim) {
  if (dim != 2 && dim != 3) throw ConfigError("task dimension must be 2 or 3");
  TaskSpec t;
  t.kind = kind;
  t.dim = dim;
  switch (kind) {
    case TaskKind::kSinglePhase:
      t.fields = {{"velocity", dim, true}, {"pressure", 1, false}};
      break;
    case TaskKind::kAdvectionCoupled:
      t.fields = {{"velocity", dim, true}, {"pressure", 1, false}, {"concentration", 1, true}};
      break;
    case TaskKind::kGrayScott:
      t.fields = {{"u", 1, true}, {"v", 1, true}};
      break;
  }
  return t;
}

int TaskSpec::output_width() const {
  int w = 0;
  for (const auto& f : fields) w += f.width;
  return w;
}

int TaskSpec::field_index(std::string_view name) const {
  for (std::size_t i = 0; i < fields.size(); ++i) {
    if (fields[i].name == name) return static_cast<int>(i);
  }
  return -1;
}

std::string to_string(TaskKind kind) {
  switch (kind) {
    case TaskKind::kSinglePhase: return "single-phase";
    case TaskKind::kAdvectionCoupled: return "advection-coupled";
    case TaskKind::kGrayScott: return "gray-scott";
  }
  return "unknown";
}

TaskKind task_from_string(std::string_view name) {
  if (name == "single-phase" || name == "taylor-green") return TaskKind::kSinglePhase;
  if (name == "advection-coupled" || name == "advdiff") return TaskKind::kAdvectionCoupled;
  if (name == "gray-scott") return TaskKind::kGrayScott;
  throw ConfigError("unknown task or case: " + std::string(name));
}

}  // namespace pegnet
