#include "unires/task.hpp"

#include <stdexcept>

namespace unires {

std::string_view task_name(TaskId task) {
  switch (task) {
    case TaskId::SR: return "SR";
    case TaskId::MD: return "MD";
    case TaskId::DD: return "DD";
    case TaskId::DN: return "DN";
    case TaskId::Positive: return "POS";
    case TaskId::Negative: return "NEG";
  }
  return "?";
}

std::string_view task_name(std::optional<TaskId> task) { return task ? task_name(*task) : "BR"; }

std::optional<TaskId> parse_task(std::string_view name) {
  if (name == "BR") return std::nullopt;
  for (TaskId t : {TaskId::SR, TaskId::MD, TaskId::DD, TaskId::DN, TaskId::Positive, TaskId::Negative}) {
    if (task_name(t) == name) return t;
  }
  throw std::invalid_argument("unknown task '" + std::string(name) + "'");
}

std::string_view task_prompt(TaskId task) {
  switch (task) {
    case TaskId::SR: return "Super-resolution";
    case TaskId::MD: return "Motion-deblur";
    case TaskId::DD: return "Defocus-deblur";
    case TaskId::DN: return "Denoise";
    case TaskId::Positive: return "photorealistic, clean, high-resolution";
    case TaskId::Negative: return "blur, dirty, low quality";
  }
  return "";
}

}  // namespace unires
