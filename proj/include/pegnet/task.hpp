#ifndef PEGNET_TASK_HPP_
#define PEGNET_TASK_HPP_

#include <string>
#include <string_view>
#include <vector>

namespace pegnet {

/// Which physics the processor embeds.
enum class TaskKind {
  kSinglePhase,       // velocity + pressure, NS block only
  kAdvectionCoupled,  // velocity + pressure + transported scalar, NS then AD block
  kGrayScott,         // two reacting species, GS block only
};

/// A physical field the model reads and predicts.
struct FieldSpec {
  std::string name;
  int width = 1;
  /// Time-integrated (decoder emits a rate) vs directly predicted (pressure).
  bool integrated = true;
};

struct TaskSpec {
  TaskKind kind = TaskKind::kSinglePhase;
  int dim = 2;
  std::vector<FieldSpec> fields;

  static TaskSpec make(TaskKind kind, int dim);

  int output_width() const;
  int field_index(std::string_view name) const;  // -1 if absent
  bool has_field(std::string_view name) const { return field_index(name) >= 0; }
};

std::string to_string(TaskKind kind);
/// Accepts the task names and the dataset case names (gray-scott, advdiff,
/// taylor-green). Throws ConfigError otherwise.
TaskKind task_from_string(std::string_view name);

}  // namespace pegnet

#endif  // PEGNET_TASK_HPP_
