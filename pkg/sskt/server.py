#!/usr/bin/env python

# Copyright 2025 The SSKT Authors. All Rights Reserved.
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#      http://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.

"""Entry point for the SSKT MCP server."""

from sskt.coordinator import mcp

# The following imports are necessary to register the tools with the `mcp`
# object, even though they are not directly used in this file.
from sskt.tools.experiments import core  # noqa: F401
from sskt.tools.experiments import metadata  # noqa: F401


def run_server() -> None:
    """Runs the server.

    Serves as the entrypoint for the 'sskt-mcp' command and the `serve` verb.
    """
    mcp.run()


if __name__ == "__main__":
    run_server()
