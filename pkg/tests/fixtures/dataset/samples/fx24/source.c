void zero_tail_checked(char *buf, int used, int size)
{
    if (used < 0 || used > size)
        return;
    memset(buf + used, 0, size - used);
}
