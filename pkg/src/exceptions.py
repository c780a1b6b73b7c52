'''
Error types raised by the simulator, the policies and the agent loop.
'''


class InvSimError(Exception):
    # stage the error happened at (0-based), attached by the agent round loop
    stage_index = None


class ConfigurationError(InvSimError, ValueError):
    pass


class InputError(InvSimError, ValueError):
    pass


class LifecycleError(InvSimError, RuntimeError):
    pass


class ParseError(InvSimError, ValueError):
    pass


'''
Chat endpoint failed or timed out after all transport retries. Aborts the
episode, unlike ParseError which falls back to a zero order.
'''
class TransportError(InvSimError, RuntimeError):
    pass


class UnknownPresetError(InvSimError, KeyError):
    def __str__(self):
        # KeyError quotes its message otherwise
        return str(self.args[0]) if self.args else ''
