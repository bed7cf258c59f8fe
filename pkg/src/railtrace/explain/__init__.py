"""LM-backed explanation generation and the conversational agent."""
from .templates import PromptTemplate, TemplateError, TemplateField, parse_fields, render_prompt
from .transport import (
    HttpChatTransport,
    LMClient,
    LMEndpoint,
    StubTransport,
    TransportError,
    endpoint_from_env,
    stub_completion,
)
from .describe import FULL_TEMPLATE, STEP_TEMPLATE, describe_full, describe_run, describe_step
from .commands import STATE_MODIFIER_TEMPLATE, CommandParseError, parse_commands
from .agent import AgentContext, AgentError, AgentTool, ChatTurn, agent_turn, build_tools

__all__ = [
    "PromptTemplate", "TemplateError", "TemplateField", "parse_fields", "render_prompt",
    "HttpChatTransport", "LMClient", "LMEndpoint", "StubTransport", "TransportError",
    "endpoint_from_env", "stub_completion",
    "FULL_TEMPLATE", "STEP_TEMPLATE", "describe_full", "describe_run", "describe_step",
    "STATE_MODIFIER_TEMPLATE", "CommandParseError", "parse_commands",
    "AgentContext", "AgentError", "AgentTool", "ChatTurn", "agent_turn", "build_tools",
]
