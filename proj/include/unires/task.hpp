#pragma once

#include <array>
#include <optional>
#include <string>
#include <string_view>

namespace unires {

/// Task identifiers a denoiser can be conditioned on. Blind restoration
/// is the absence of a task (std::nullopt), not a member of this enum.
enum class TaskId { SR, MD, DD, DN, Positive, Negative };

inline constexpr std::array<TaskId, 4> kRestorationTasks = {TaskId::SR, TaskId::MD, TaskId::DD, TaskId::DN};

std::string_view task_name(TaskId task);
std::string_view task_name(std::optional<TaskId> task);  // "BR" for nullopt
std::optional<TaskId> parse_task(std::string_view name);  // throws on unknown names; "BR" -> nullopt

/// Training prompt each task stood for in the original text-conditioned
/// model. Only used for display.
std::string_view task_prompt(TaskId task);

}  // namespace unires
